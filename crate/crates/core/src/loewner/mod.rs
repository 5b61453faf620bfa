//! Slit growth by the Loewner-Kufarev parameter ODE.
//!
//! The control coefficients `C_i(t)` are chosen so the slits grow with fixed
//! speed ratios, and they are rescaled so the evolution parameter is the
//! length of slit 1. The zero-length start is regularized by splitting each
//! collapsed triple by `ε`; the end of a run where slit tips reach the
//! boundary is handled by stopping on prevertex coalescence and merging
//! clusters.

mod evolve;
mod merge;
pub mod rhs;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sc_core::{AccessoryState, Role, ScError, SlitGroup};
use rhs::{Frame, Layout};

pub use evolve::{evolve, StepDiagnostics, Termination, Trace};
pub use merge::{merge_degenerate, merge_trace, MergeAmbiguity, MergeResult, MergedPrevertex};

#[derive(Debug, Clone, Error)]
pub enum LoewnerError {
    #[error("prevertices {left} and {right} coincide (gap {gap:e})")]
    Degenerate { left: String, right: String, gap: f64 },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("velocity relations other than constant ratios are not supported")]
    Unsupported,
    #[error("series start needs q > 0 for slit {slit}, got {q}")]
    SeriesDomain { slit: usize, q: f64 },
    #[error("integration stalled at t = {t}: {reason}")]
    Stiffness {
        t: f64,
        reason: String,
        last_good: Box<AccessoryState>,
    },
    #[error("prevertex ordering violated at t = {t}")]
    Ordering { t: f64, last_good: Box<AccessoryState> },
    #[error(transparent)]
    Sc(#[from] ScError),
}

/// How the control coefficients are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlLaw {
    /// Constant speed ratios, parametrized by the length of slit 1.
    #[default]
    ConstantRatios,
    /// Constant raw values of `C̃_i`; the parameter is then not a length.
    Fixed(Vec<f64>),
    /// Reserved for general velocity relations; rejected.
    NonStationary,
}

/// One slit to grow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitSpec {
    pub base_point: Complex64,
    pub direction: Complex64,
    /// Prevertex of the base point at `t = 0`.
    pub lambda0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Speed ratio `α_i > 0`.
    pub ratio: f64,
    /// Vertex the slit starts from, if any.
    #[serde(default)]
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitPlan {
    pub slits: Vec<SlitSpec>,
    pub target_l1: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::merge_tol")]
    pub merge_tol: f64,
    #[serde(default = "defaults::cluster_tol")]
    pub cluster_tol: f64,
    #[serde(default = "defaults::ode_tol")]
    pub ode_tol: f64,
    #[serde(default)]
    pub control: ControlLaw,
}

pub mod defaults {
    pub fn epsilon() -> f64 {
        1e-12
    }
    pub fn merge_tol() -> f64 {
        1e-9
    }
    pub fn cluster_tol() -> f64 {
        1e-4
    }
    pub fn ode_tol() -> f64 {
        1e-10
    }
}

impl SlitPlan {
    pub fn new(slits: Vec<SlitSpec>, target_l1: f64) -> Self {
        Self {
            slits,
            target_l1,
            epsilon: defaults::epsilon(),
            merge_tol: defaults::merge_tol(),
            cluster_tol: defaults::cluster_tol(),
            ode_tol: defaults::ode_tol(),
            control: ControlLaw::ConstantRatios,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.slits.iter().map(|s| s.ratio).collect()
    }

    pub fn validate(&self) -> Result<(), LoewnerError> {
        if self.slits.is_empty() {
            return Err(LoewnerError::Plan("no slits".into()));
        }
        if !(self.target_l1 >= 0.0) || !self.target_l1.is_finite() {
            return Err(LoewnerError::Plan(format!("target length {} must be >= 0", self.target_l1)));
        }
        for (i, s) in self.slits.iter().enumerate() {
            if !(s.ratio > 0.0) || !s.ratio.is_finite() {
                return Err(LoewnerError::Plan(format!("slit {i}: ratio must be positive")));
            }
            if !(s.lambda0 < 0.0) {
                return Err(LoewnerError::Plan(format!(
                    "slit {i}: base prevertex {} must be negative (bases on the sides through the images of 0, 1 and infinity are not supported)",
                    s.lambda0
                )));
            }
        }
        for w in self.slits.windows(2) {
            if !(w[0].lambda0 < w[1].lambda0) {
                return Err(LoewnerError::Plan("base prevertices must be distinct and increasing".into()));
            }
        }
        if !(self.epsilon > 0.0) || !(self.merge_tol > 0.0) || !(self.cluster_tol > 0.0) || !(self.ode_tol > 0.0) {
            return Err(LoewnerError::Plan("tolerances must be positive".into()));
        }
        match &self.control {
            ControlLaw::NonStationary => Err(LoewnerError::Unsupported),
            ControlLaw::Fixed(c) if c.len() != self.slits.len() || c.iter().any(|v| !(*v >= 0.0)) => Err(
                LoewnerError::Plan("fixed control needs one nonnegative value per slit".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Adds zero-length slits to a slit-free state. Vertex-based slits take
    /// over that vertex's prevertex.
    pub fn attach(&self, base: &AccessoryState) -> Result<AccessoryState, LoewnerError> {
        self.validate()?;
        if !base.slits.is_empty() {
            return Err(LoewnerError::Plan("initial state already has slits".into()));
        }
        let mut s = base.clone();
        s.t = 0.0;
        for spec in &self.slits {
            let mut g = SlitGroup::collapsed(spec.lambda0, spec.sigma1, spec.sigma2, spec.base_point, spec.direction);
            if let Some(k) = spec.vertex {
                let pos = s.fixed.iter().position(|f| f.vertex == k).ok_or_else(|| {
                    LoewnerError::Plan(format!("vertex {k} has no free prevertex to start a slit from"))
                })?;
                let f = s.fixed.remove(pos);
                if f.x != spec.lambda0 {
                    return Err(LoewnerError::Plan(format!(
                        "slit at vertex {k} must start at its prevertex {}",
                        f.x
                    )));
                }
                g = g.at_vertex(k);
            }
            s.slits.push(g);
        }
        s.validate()?;
        Ok(s)
    }
}

/// Normalized control coefficients and the length-parametrization factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    /// Sums to 1.
    pub c: Vec<f64>,
    /// `s = 1 / (|c| A_1 C_1)`; `C̃ = s C`.
    pub scale: f64,
}

impl ControlVector {
    pub fn rescaled(&self) -> Vec<f64> {
        self.c.iter().map(|v| v * self.scale).collect()
    }
}

fn frame_of(state: &AccessoryState) -> (Layout, Frame) {
    let layout = Layout::of(state);
    let x = rhs::positions(&layout, state);
    (layout, Frame::from_positions(&x))
}

/// `A_r(t)`, so that the tip speed is `|c| A_r C_r`.
pub fn speed_factor(state: &AccessoryState, r: usize) -> Result<f64, LoewnerError> {
    if r >= state.slits.len() {
        return Err(ScError::SlitIndex {
            index: r,
            count: state.slits.len(),
        }
        .into());
    }
    let (layout, f) = frame_of(state);
    Ok(rhs::log_speed_factors(&layout, &f)?[r].exp())
}

/// Normalized `C` enforcing the plan's speed ratios; `scale` is left at 1.
pub fn control_coefficients(state: &AccessoryState, plan: &SlitPlan) -> Result<ControlVector, LoewnerError> {
    let (layout, f) = frame_of(state);
    let la = rhs::log_speed_factors(&layout, &f)?;
    Ok(ControlVector {
        c: rhs::normalized_control(&plan.ratios(), &la),
        scale: 1.0,
    })
}

/// Sets the scale so that `dL_1/dt = 1`.
pub fn rescale_for_length_param(ctl: &ControlVector, state: &AccessoryState) -> Result<ControlVector, LoewnerError> {
    let a1 = speed_factor(state, 0)?;
    let v = state.c.norm() * a1 * ctl.c[0];
    if !(v > 0.0) || !v.is_finite() {
        return Err(LoewnerError::Degenerate {
            left: "lambda1".into(),
            right: "speed".into(),
            gap: v,
        });
    }
    Ok(ControlVector {
        c: ctl.c.clone(),
        scale: 1.0 / v,
    })
}

/// Time derivatives of every accessory parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDerivative {
    pub c: Complex64,
    /// Same order as `AccessoryState::fixed`.
    pub fixed: Vec<f64>,
    /// `(da1, dlambda, da2)` per slit.
    pub slits: Vec<(f64, f64, f64)>,
}

/// Evaluates the parameter ODE for control values `c_tilde` (one per slit).
pub fn ode_rhs(state: &AccessoryState, c_tilde: &[f64]) -> Result<StateDerivative, LoewnerError> {
    if c_tilde.len() != state.slits.len() {
        return Err(LoewnerError::Plan("one control value per slit required".into()));
    }
    let (layout, f) = frame_of(state);
    let (v, logc) = rhs::velocities(&layout, &f, c_tilde)?;
    let mut out = StateDerivative {
        c: state.c * logc,
        fixed: vec![0.0; state.fixed.len()],
        slits: vec![(0.0, 0.0, 0.0); state.slits.len()],
    };
    for (r, vel) in layout.roles.iter().zip(&v) {
        match *r {
            Role::Fixed { vertex } => {
                let i = state.fixed.iter().position(|f| f.vertex == vertex).unwrap();
                out.fixed[i] = *vel;
            }
            Role::Bank { slit, side: 0 } => out.slits[slit].0 = *vel,
            Role::Bank { slit, .. } => out.slits[slit].2 = *vel,
            Role::Tip { slit } => out.slits[slit].1 = *vel,
            _ => {}
        }
    }
    Ok(out)
}

/// Left and right sides of the substituted Loewner identity at `z`, with the
/// derivative taken from [`ode_rhs`].
pub fn residue_identity(state: &AccessoryState, c_tilde: &[f64], z: Complex64) -> Result<(Complex64, Complex64), LoewnerError> {
    let (layout, f) = frame_of(state);
    let (v, logc) = rhs::velocities(&layout, &f, c_tilde)?;
    Ok(rhs::residue_sides(&layout, &f, c_tilde, &v, logc, z))
}

/// Splits every collapsed triple into `(λ - ε, λ, λ + ε)`.
pub fn regularize_initial(state0: &AccessoryState, plan: &SlitPlan) -> Result<AccessoryState, LoewnerError> {
    let eps = plan.epsilon;
    let mut s = state0.clone();
    let pv = state0.prevertices();
    for (i, g) in s.slits.iter_mut().enumerate() {
        if !(g.a1 == g.lambda && g.lambda == g.a2) {
            continue;
        }
        let lam = g.lambda;
        let gap = pv
            .iter()
            .filter(|p| !matches!(p.role, Role::Bank { slit, .. } | Role::Tip { slit } if slit == i))
            .map(|p| (p.x - lam).abs())
            .fold(f64::INFINITY, f64::min);
        if !(eps < 0.5 * gap) {
            return Err(LoewnerError::Plan(format!(
                "epsilon {eps:e} is not below half the gap {gap:e} next to slit {i}"
            )));
        }
        g.a1 = lam - eps;
        g.a2 = lam + eps;
    }
    s.validate()?;
    Ok(s)
}

/// First-order coefficients of the expansion in `sqrt(t)` at the start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub q: f64,
    pub lambda1: f64,
    pub a1_1: f64,
    pub a2_1: f64,
}

/// Coefficients for each slit given the initial control values `c0`
/// (the `C̃_{i,0}`). Fixed prevertices have zero first-order terms.
pub fn series_first_order(state0: &AccessoryState, c0: &[f64]) -> Result<Vec<SeriesCoefficients>, LoewnerError> {
    if c0.len() != state0.slits.len() {
        return Err(LoewnerError::Plan("one control value per slit required".into()));
    }
    state0
        .slits
        .iter()
        .zip(c0)
        .enumerate()
        .map(|(i, (g, &ci))| {
            let l0 = g.lambda;
            let q = -2.0 * ci * l0 * (l0 - 1.0).powi(2);
            if !(q > 0.0) {
                return Err(LoewnerError::SeriesDomain { slit: i, q });
            }
            let al1 = g.sigma1 + 1.0;
            let al2 = g.sigma2 + 1.0;
            if !(al1 > 0.0 && al2 > 0.0) {
                return Err(LoewnerError::Plan(format!("slit {i}: bank angles must be positive")));
            }
            Ok(SeriesCoefficients {
                q,
                lambda1: (al1 - al2) * (q / (al1 * al2)).sqrt(),
                a1_1: -(q * al2 / al1).sqrt(),
                a2_1: (q * al1 / al2).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
