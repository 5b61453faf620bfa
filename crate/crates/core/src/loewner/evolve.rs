use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rhs::{self, Frame, Layout};
use super::{ControlLaw, LoewnerError, SlitPlan};
use crate::ode::{dopri5, DopriOptions, Flow, OdeError};
use crate::sc_core::{AccessoryState, ScMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the target parameter.
    Completed,
    /// Stopped because two prevertices came closer than `merge_tol`.
    Degenerate { left: String, right: String, gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    /// Accepted step that led here (0 for the initial state).
    pub h: f64,
    /// Scaled local error estimate of that step (1 = at tolerance).
    pub error: f64,
    /// Normalized control coefficients.
    pub control: Vec<f64>,
    /// Factor turning the normalized control into the one integrated.
    pub scale: f64,
    /// `|Λ_i - B_i|` for every slit.
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub snapshots: Vec<AccessoryState>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub termination: Termination,
    pub rejected_steps: usize,
}

impl Trace {
    pub fn last(&self) -> &AccessoryState {
        self.snapshots.last().expect("trace is never empty")
    }
}

struct Control {
    normalized: Vec<f64>,
    scale: f64,
    integrated: Vec<f64>,
}

fn control(law: &ControlLaw, ratios: &[f64], layout: &Layout, f: &Frame, c: Complex64) -> Result<Control, LoewnerError> {
    match law {
        ControlLaw::ConstantRatios => {
            let la = rhs::log_speed_factors(layout, f)?;
            let normalized = rhs::normalized_control(ratios, &la);
            let lc = c.norm().ln();
            // C̃_r = (α_r / α_1) / (|c| A_r): tip 1 then moves at unit speed.
            let integrated: Vec<f64> = ratios
                .iter()
                .zip(&la)
                .map(|(r, a)| (r.ln() - ratios[0].ln() - lc - a).exp())
                .collect();
            let scale = integrated[0] / normalized[0];
            Ok(Control {
                normalized,
                scale,
                integrated,
            })
        }
        ControlLaw::Fixed(v) => {
            let total: f64 = v.iter().sum();
            Ok(Control {
                normalized: v.iter().map(|x| x / total).collect(),
                scale: total,
                integrated: v.clone(),
            })
        }
        ControlLaw::NonStationary => Err(LoewnerError::Unsupported),
    }
}

fn unpack(y: &[f64], m: usize) -> (Frame, Complex64) {
    (Frame::from_gaps(y[0], &y[1..m]), Complex64::new(y[m], y[m + 1]))
}

/// Integrates the parameter ODE from a regularized state to `plan.target_l1`.
///
/// The state vector is `(x_0, gaps, Re c, Im c)`: the leftmost moving
/// prevertex and the gaps between consecutive moving prevertices. Gaps use a
/// purely relative error scale.
pub fn evolve(state0: &AccessoryState, plan: &SlitPlan) -> Result<Trace, LoewnerError> {
    plan.validate()?;
    if state0.slits.len() != plan.slits.len() {
        return Err(LoewnerError::Plan(format!(
            "state has {} slits, plan has {}",
            state0.slits.len(),
            plan.slits.len()
        )));
    }
    state0.validate()?;
    let layout = Layout::of(state0);
    let m = layout.moving_len();
    let x = rhs::positions(&layout, state0);
    let f0 = Frame::from_positions(&x);
    if let Some((k, g)) = f0.min_gap() {
        if !(g > 0.0) {
            return Err(LoewnerError::Plan(format!(
                "prevertices {} and {} coincide; regularize the initial state first",
                layout.roles[k].label(),
                layout.roles[k + 1].label()
            )));
        }
    }
    let ratios = plan.ratios();
    let law = plan.control.clone();
    let ctl0 = control(&law, &ratios, &layout, &f0, state0.c)?;

    let mut y0 = Vec::with_capacity(m + 2);
    y0.push(x[0]);
    for k in 1..m {
        y0.push(x[k] - x[k - 1]);
    }
    y0.push(state0.c.re);
    y0.push(state0.c.im);

    let materialize = |t: f64, y: &[f64]| -> AccessoryState {
        let (f, c) = unpack(y, m);
        rhs::with_positions(&layout, state0, &f.x[..m], t, c)
    };

    let mut snapshots = vec![state0.clone()];
    let mut diagnostics = vec![StepDiagnostics {
        t: state0.t,
        h: 0.0,
        error: 0.0,
        control: ctl0.normalized.clone(),
        scale: ctl0.scale,
        lengths: Vec::new(),
    }];
    let mut termination = Termination::Completed;

    let min_gap0 = f0.min_gap().map_or(1.0, |(_, g)| g);
    let h0 = (0.1 * min_gap0).min(0.01 * plan.target_l1.max(f64::MIN_POSITIVE));
    let opts = DopriOptions {
        tol: plan.ode_tol,
        h_init: h0,
        ..Default::default()
    };
    let t0 = state0.t;
    let t_end = t0 + plan.target_l1;
    let mut prev_gaps: Vec<f64> = y0[1..m].to_vec();
    let merge_tol = plan.merge_tol;

    let result = dopri5(
        |_t, y: &[f64], dy: &mut [f64]| -> Result<(), LoewnerError> {
            let (f, c) = unpack(y, m);
            let ctl = control(&law, &ratios, &layout, &f, c)?;
            let (v, logc) = rhs::velocities(&layout, &f, &ctl.integrated)?;
            dy[0] = v[0];
            for k in 1..m {
                dy[k] = v[k] - v[k - 1];
            }
            let dc = c * logc;
            dy[m] = dc.re;
            dy[m + 1] = dc.im;
            Ok(())
        },
        |a: &[f64], b: &[f64], sc: &mut [f64]| {
            sc[0] = a[0].abs().max(b[0].abs()).max(1e-3);
            for k in 1..m {
                sc[k] = a[k].abs().max(b[k].abs());
            }
            let cn = Complex64::new(a[m], a[m + 1]).norm().max(Complex64::new(b[m], b[m + 1]).norm());
            sc[m] = cn;
            sc[m + 1] = cn;
        },
        |y: &[f64]| y[1..m].iter().all(|g| *g > 0.0) && y[0] + y[1..m].iter().sum::<f64>() < 0.0,
        |t: f64| (0.5 * (t - t0)).max(h0),
        |t, y: &[f64], info| {
            let state = materialize(t, y);
            let (f, c) = unpack(y, m);
            let ctl = control(&law, &ratios, &layout, &f, c);
            let (normalized, scale) = match ctl {
                Ok(c) => (c.normalized, c.scale),
                Err(_) => (Vec::new(), f64::NAN),
            };
            diagnostics.push(StepDiagnostics {
                t,
                h: info.h,
                error: info.error,
                control: normalized,
                scale,
                lengths: Vec::new(),
            });
            snapshots.push(state);
            let gaps = &y[1..m];
            let mut flow = Flow::Continue;
            for k in 0..gaps.len() {
                if gaps[k] < merge_tol && gaps[k] < prev_gaps[k] {
                    termination = Termination::Degenerate {
                        left: layout.roles[k].label(),
                        right: layout.roles[k + 1].label(),
                        gap: gaps[k],
                    };
                    flow = Flow::Stop;
                    break;
                }
            }
            prev_gaps.copy_from_slice(gaps);
            flow
        },
        t0,
        &y0,
        t_end,
        &opts,
    );

    let rejected_steps = match result {
        Ok(out) => out.rejected,
        Err(OdeError::Rhs(e)) => return Err(e),
        Err(OdeError::StepUnderflow { t, h, y, last }) => {
            return Err(LoewnerError::Stiffness {
                t,
                reason: format!("step size underflow (h = {h:e}): {last}"),
                last_good: Box::new(materialize(t, &y)),
            })
        }
        Err(OdeError::TooManySteps { t, y, max_steps }) => {
            return Err(LoewnerError::Stiffness {
                t,
                reason: format!("more than {max_steps} steps"),
                last_good: Box::new(materialize(t, &y)),
            })
        }
    };

    let lengths: Vec<Result<Vec<f64>, LoewnerError>> = snapshots.par_iter().map(slit_lengths).collect();
    for (d, l) in diagnostics.iter_mut().zip(lengths) {
        d.lengths = l?;
    }
    Ok(Trace {
        snapshots,
        diagnostics,
        termination,
        rejected_steps,
    })
}

/// `|Λ_i - B_i|` for every slit of a state.
pub(super) fn slit_lengths(s: &AccessoryState) -> Result<Vec<f64>, LoewnerError> {
    let map = ScMap::from_state(s)?;
    s.slits
        .iter()
        .map(|g| Ok((map.map_real(g.lambda)? - g.base_point).norm()))
        .collect()
}
