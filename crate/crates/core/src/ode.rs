//! Dormand-Prince 5(4) with PI step-size control.
//!
//! The caller supplies the error scale per component, so the same driver
//! handles mixed absolute/relative weighting (tiny prevertex gaps need a
//! purely relative scale).

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopriOptions {
    /// Target for the scaled RMS local error.
    pub tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub safety: f64,
    /// PI controller memory exponent (0 gives the plain I controller).
    pub beta: f64,
    pub fac_min: f64,
    pub fac_max: f64,
}

impl Default for DopriOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            h_init: 1e-6,
            h_min: 1e-300,
            h_max: f64::INFINITY,
            max_steps: 200_000,
            safety: 0.9,
            beta: 0.04,
            fac_min: 0.2,
            fac_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub h: f64,
    pub error: f64,
    pub rejected_since_last: usize,
}

/// What the observer wants after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Error)]
pub enum OdeError<E: std::error::Error + 'static> {
    #[error("step size underflow at t = {t} (h = {h:e}); last rhs problem: {last}")]
    StepUnderflow { t: f64, h: f64, y: Vec<f64>, last: String },
    #[error("step limit {max_steps} reached at t = {t}")]
    TooManySteps { t: f64, y: Vec<f64>, max_steps: usize },
    #[error("right-hand side failed at the initial point")]
    Rhs(#[source] E),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// True when the observer stopped the run before `t_end`.
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`.
///
/// * `rhs(t, y, dy)` may fail; a failing trial stage counts as a rejected step.
/// * `scale(y_old, y_new, sc)` fills the per-component error scale.
/// * `admissible(y)` can veto a trial state (for example an ordering violation).
/// * `h_cap(t)` bounds the next step from `t`.
/// * `observe(t, y, info)` runs after every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn dopri5<E, R, S, A, H, O>(
    mut rhs: R,
    scale: S,
    admissible: A,
    h_cap: H,
    mut observe: O,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &DopriOptions,
) -> Result<Outcome, OdeError<E>>
where
    E: std::error::Error + 'static,
    R: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    S: Fn(&[f64], &[f64], &mut [f64]),
    A: Fn(&[f64]) -> bool,
    H: Fn(f64) -> f64,
    O: FnMut(f64, &[f64], StepInfo) -> Flow,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = Outcome {
        t,
        y: y.clone(),
        accepted: 0,
        rejected: 0,
        stopped: false,
    };
    if !(t_end > t0) {
        return Ok(out);
    }
    let mut k1 = vec![0.0; n];
    rhs(t, &y, &mut k1).map_err(OdeError::Rhs)?;
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut sc = vec![0.0; n];

    let mut h = opts.h_init.min(opts.h_max).min(t_end - t0);
    let expo1 = 0.2 - opts.beta * 0.75;
    let mut fac_old: f64 = 1e-4;
    let mut last_problem = String::from("none");
    let mut rejected_run = 0usize;
    let mut reject_prev = false;

    loop {
        if out.accepted + out.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps {
                t,
                y,
                max_steps: opts.max_steps,
            });
        }
        h = h.min(h_cap(t)).min(opts.h_max);
        let mut last = false;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }
        if h < opts.h_min || t + h == t {
            return Err(OdeError::StepUnderflow {
                t,
                h,
                y,
                last: last_problem,
            });
        }

        // Stages. Any failure rejects the step with a hard shrink.
        let stage = (|| -> Result<(), String> {
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            rhs(t + C2 * h, &ytmp, &mut k2).map_err(|e| e.to_string())?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * h, &ytmp, &mut k3).map_err(|e| e.to_string())?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * h, &ytmp, &mut k4).map_err(|e| e.to_string())?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * h, &ytmp, &mut k5).map_err(|e| e.to_string())?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + h, &ytmp, &mut k6).map_err(|e| e.to_string())?;
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            if !admissible(&ynew) {
                return Err("trial state not admissible".into());
            }
            rhs(t + h, &ynew, &mut k7).map_err(|e| e.to_string())?;
            Ok(())
        })();
        if let Err(msg) = stage {
            last_problem = msg;
            h *= 0.25;
            out.rejected += 1;
            rejected_run += 1;
            reject_prev = true;
            continue;
        }

        scale(&y, &ynew, &mut sc);
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / sc[i]).powi(2);
        }
        let err = (err / n as f64).sqrt() / opts.tol;
        if !err.is_finite() {
            last_problem = "non-finite error estimate".into();
            h *= 0.25;
            out.rejected += 1;
            rejected_run += 1;
            reject_prev = true;
            continue;
        }

        let fac11 = err.powf(expo1);
        let fac = (fac11 / fac_old.powf(opts.beta)) / opts.safety;
        let fac = fac.clamp(1.0 / opts.fac_max, 1.0 / opts.fac_min);
        let h_next = h / fac;

        if err <= 1.0 {
            fac_old = err.max(1e-4);
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            out.accepted += 1;
            let info = StepInfo {
                h,
                error: err,
                rejected_since_last: rejected_run,
            };
            rejected_run = 0;
            let flow = observe(t, &y, info);
            if flow == Flow::Stop || last {
                out.t = t;
                out.y = y;
                out.stopped = flow == Flow::Stop && !last;
                return Ok(out);
            }
            h = if reject_prev { h_next.min(h) } else { h_next };
            reject_prev = false;
        } else {
            last_problem = format!("local error {err:.3e} times tolerance");
            h /= (fac11 / opts.safety).min(1.0 / opts.fac_min);
            out.rejected += 1;
            rejected_run += 1;
            reject_prev = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Error)]
    #[error("never")]
    struct Never;

    fn rel_scale(tol_abs: f64) -> impl Fn(&[f64], &[f64], &mut [f64]) {
        move |a, b, sc| {
            for i in 0..sc.len() {
                sc[i] = tol_abs + a[i].abs().max(b[i].abs());
            }
        }
    }

    #[test]
    fn exponential_growth() {
        let out = dopri5(
            |_t, y: &[f64], dy: &mut [f64]| -> Result<(), Never> {
                dy[0] = y[0];
                Ok(())
            },
            rel_scale(0.0),
            |_| true,
            |_| f64::INFINITY,
            |_, _, _| Flow::Continue,
            0.0,
            &[1.0],
            1.0,
            &DopriOptions::default(),
        )
        .unwrap();
        assert_eq!(out.t, 1.0);
        assert!((out.y[0] - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let out = dopri5(
            |_t, y: &[f64], dy: &mut [f64]| -> Result<(), Never> {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            rel_scale(1e-3),
            |_| true,
            |_| f64::INFINITY,
            |_, _, _| Flow::Continue,
            0.0,
            &[1.0, 0.0],
            2.0 * std::f64::consts::PI,
            &DopriOptions::default(),
        )
        .unwrap();
        assert!((out.y[0] - 1.0).abs() < 1e-8 && out.y[1].abs() < 1e-8);
    }

    #[test]
    fn sqrt_start_with_cap() {
        // y = sqrt(t) solves y' = 1 / (2 y); start slightly off zero.
        let t0 = 1e-12;
        let out = dopri5(
            |_t, y: &[f64], dy: &mut [f64]| -> Result<(), Never> {
                dy[0] = 0.5 / y[0];
                Ok(())
            },
            rel_scale(0.0),
            |y| y[0] > 0.0,
            |t| (0.5 * t).max(1e-13),
            |_, _, _| Flow::Continue,
            t0,
            &[t0.sqrt()],
            1.0,
            &DopriOptions {
                h_init: 1e-13,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((out.y[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn observer_can_stop() {
        let out = dopri5(
            |_t, _y: &[f64], dy: &mut [f64]| -> Result<(), Never> {
                dy[0] = 1.0;
                Ok(())
            },
            rel_scale(1.0),
            |_| true,
            |_| 0.1,
            |t, _, _| if t >= 0.5 { Flow::Stop } else { Flow::Continue },
            0.0,
            &[0.0],
            1.0,
            &DopriOptions::default(),
        )
        .unwrap();
        assert!(out.stopped && out.t >= 0.5 && out.t < 1.0);
    }

    #[test]
    fn zero_length_run() {
        let out = dopri5(
            |_t, _y: &[f64], _dy: &mut [f64]| -> Result<(), Never> { Ok(()) },
            rel_scale(1.0),
            |_| true,
            |_| 1.0,
            |_, _, _| Flow::Continue,
            0.0,
            &[3.0],
            0.0,
            &DopriOptions::default(),
        )
        .unwrap();
        assert_eq!(out.accepted, 0);
        assert_eq!(out.y, vec![3.0]);
    }
}
