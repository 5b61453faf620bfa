//! Scenario files, built-in presets and staged runs.
//!
//! A scenario is one JSON document: an initial polygon, a list of stages
//! (each grows a set of slits), tolerances, and which artifacts to write.
//! The merged end state of one stage is flattened into a polygon that seeds
//! the next.

mod export;
mod presets;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loewner::{
    evolve, merge_trace, regularize_initial, ControlLaw, LoewnerError, MergeResult, SlitPlan, SlitSpec, Termination,
    Trace,
};
use crate::oracle::{chain_lengths, solve_prevertices, verify_trace, NewtonOptions, OracleError, VerifyReport, VerifyThresholds};
use crate::quadrature::{agm, elliptic_k, QuadratureError};
use crate::sc_core::{
    locate_with, side_slit_exponents, vertex_slit_exponents, AccessoryState, GridSpec, PolygonSpec, Role, ScError, ScMap,
};

pub use export::{
    default_grid, final_map, format_table, grid_csv, grid_svg, params_json, trace_csv, write_artifacts, write_failure,
};
pub use presets::{example1, example2, preset};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Loewner {
        stage: usize,
        #[source]
        source: LoewnerError,
    },
    #[error(transparent)]
    Sc(#[from] ScError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ScenarioError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) | ScenarioError::Json(_) => 2,
            ScenarioError::Loewner {
                source: LoewnerError::Plan(_) | LoewnerError::Unsupported,
                ..
            } => 2,
            ScenarioError::Io(_) => 3,
            _ => 3,
        }
    }

    /// Last good state, when the failure carries one.
    pub fn last_good(&self) -> Option<&AccessoryState> {
        match self {
            ScenarioError::Loewner {
                source: LoewnerError::Stiffness { last_good, .. } | LoewnerError::Ordering { last_good, .. },
                ..
            } => Some(last_good),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPolygon {
    /// Identity map of the upper half-plane onto itself.
    HalfPlane,
    /// Rectangle `[-w/2, w/2] x [0, h]` with 0 -> w/2, 1 -> w/2 + ih, ∞ -> ih.
    Rectangle { width: f64, height: f64 },
    Explicit {
        polygon: PolygonSpec,
        c: Complex64,
        /// Prevertices of the free vertices, in vertex order.
        prevertices: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitConfig {
    pub base_point: Complex64,
    /// Points into the domain; defaults to perpendicular to the side (or the
    /// angle bisector at a vertex).
    #[serde(default)]
    pub direction: Option<Complex64>,
    /// Explicit `(σ_1, σ_2)`; otherwise derived from the direction.
    #[serde(default)]
    pub exponents: Option<[f64; 2]>,
    #[serde(default = "one")]
    pub ratio: f64,
    /// Explicit base prevertex; otherwise located on the boundary.
    #[serde(default)]
    pub prevertex: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub target_l1: f64,
    pub slits: Vec<SlitConfig>,
    #[serde(default)]
    pub control: ControlLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub tol_map: f64,
    pub epsilon: f64,
    pub cluster_tol: f64,
    pub merge_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode_tol: 1e-10,
            tol_map: 1e-9,
            epsilon: 1e-12,
            cluster_tol: 1e-4,
            merge_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    pub table: bool,
    pub trace: bool,
    pub grid: bool,
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub initial: InitialPolygon,
    #[serde(default)]
    pub stages: Vec<StageConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("ode_tol", t.ode_tol),
            ("tol_map", t.tol_map),
            ("epsilon", t.epsilon),
            ("cluster_tol", t.cluster_tol),
            ("merge_tol", t.merge_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ScenarioError::Config(format!("{name} must be positive")));
            }
        }
        for (k, s) in self.stages.iter().enumerate() {
            if !(s.target_l1 > 0.0) {
                return Err(ScenarioError::Config(format!("stage {k}: target_l1 must be positive")));
            }
            if s.slits.is_empty() {
                return Err(ScenarioError::Config(format!("stage {k}: no slits")));
            }
        }
        if let InitialPolygon::Rectangle { width, height } = self.initial {
            if !(width > 0.0 && height > 0.0) {
                return Err(ScenarioError::Config("rectangle sides must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Closed-form accessory parameters of the rectangle `[-w/2, w/2] x [0, h]`
/// with 0 -> w/2, 1 -> w/2 + ih and ∞ -> ih (the middle of the top side).
///
/// The modulus `κ` solves `2 K(κ) / K(κ') = w / h`. Then
/// `a_2 = -2κ / (1 - κ)`, `a_1 = a_2 - 1`, and
/// `c = -h s / (2 K(1 / s))` with `s = (1 + κ) / (1 - κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleConstants {
    pub kappa: f64,
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
}

pub fn rectangle_constants(width: f64, height: f64) -> Result<RectangleConstants, ScenarioError> {
    if !(width > 0.0 && height > 0.0) {
        return Err(ScenarioError::Config("rectangle sides must be positive".into()));
    }
    let target = width / height;
    // Bisection on u = ln(κ / κ'); the ratio 2 K(κ) / K(κ') = 2 M(1, κ) / M(1, κ')
    // increases with u. Both moduli are formed directly so neither loses digits.
    let moduli = |u: f64| (1.0 / (1.0 + (-2.0 * u).exp()).sqrt(), 1.0 / (1.0 + (2.0 * u).exp()).sqrt());
    let ratio = |u: f64| {
        let (k, kp) = moduli(u);
        2.0 * agm(1.0, k) / agm(1.0, kp)
    };
    let (mut lo, mut hi) = (-300.0, 300.0);
    if !(ratio(lo) < target && ratio(hi) > target) {
        return Err(ScenarioError::Config(format!("aspect ratio {target} out of range")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (kappa, kp) = moduli(0.5 * (lo + hi));
    // 1 - κ = κ'² / (1 + κ)
    let a2 = -2.0 * kappa * (1.0 + kappa) / (kp * kp);
    let a1 = a2 - 1.0;
    let s = (1.0 + kappa) * (1.0 + kappa) / (kp * kp);
    let k = 1.0 / s;
    let c = -height * s / (2.0 * elliptic_k(k)?);
    Ok(RectangleConstants { kappa, a1, a2, c })
}

pub fn rectangle_state(width: f64, height: f64) -> Result<AccessoryState, ScenarioError> {
    let rc = rectangle_constants(width, height)?;
    let (hw, h) = (0.5 * width, height);
    let polygon = PolygonSpec::new(
        vec![
            Some(Complex64::new(-hw, h)),
            Some(Complex64::new(-hw, 0.0)),
            Some(Complex64::new(hw, 0.0)),
            Some(Complex64::new(hw, h)),
            Some(Complex64::new(0.0, h)),
        ],
        vec![0.5, 0.5, 0.5, 0.5, 1.0],
        2,
    )?;
    Ok(AccessoryState::without_slits(
        Arc::new(polygon),
        Complex64::new(rc.c, 0.0),
        &[rc.a1, rc.a2],
    )?)
}

pub fn initial_state(init: &InitialPolygon) -> Result<AccessoryState, ScenarioError> {
    match init {
        InitialPolygon::HalfPlane => Ok(AccessoryState::identity()),
        InitialPolygon::Rectangle { width, height } => rectangle_state(*width, *height),
        InitialPolygon::Explicit { polygon, c, prevertices } => {
            if prevertices.len() != polygon.free_count() {
                return Err(ScenarioError::Config(format!(
                    "{} prevertices given for {} free vertices",
                    prevertices.len(),
                    polygon.free_count()
                )));
            }
            AccessoryState::without_slits(Arc::new(polygon.clone()), *c, prevertices)
                .map_err(|e| ScenarioError::Config(e.to_string()))
        }
    }
}

fn on_segment(w: Complex64, a: Complex64, b: Complex64, tol: f64, s_min: f64) -> bool {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (w - a).norm() <= tol;
    }
    let s = ((w - a) * d.conj()).re / l2;
    (s_min..=1.0 + 1e-12).contains(&s) && (w - (a + d * s.clamp(0.0, 1.0))).norm() <= tol
}

/// Locates the prevertex of a boundary point among the sides whose
/// prevertices are negative. Returns the prevertex and, for a point at a free
/// vertex, that vertex.
pub fn locate_base(state: &AccessoryState, w: Complex64, tol_map: f64) -> Result<(f64, Option<usize>), ScenarioError> {
    let map = ScMap::from_state(state)?;
    let pv = state.prevertices();
    let scale = 1.0 + w.norm();
    // At a free vertex?
    for p in &pv {
        if let Role::Fixed { vertex } = p.role {
            if let Some(a) = state.polygon.vertex(vertex) {
                if (a - w).norm() <= 1e-12 * scale {
                    return Ok((p.x, Some(vertex)));
                }
            }
        }
    }
    let mut ends: Vec<f64> = pv.iter().filter(|p| p.x <= 0.0).map(|p| p.x).collect();
    ends.dedup();
    // Bounded sides between consecutive negative prevertices (and 0).
    for win in ends.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let flo = map.map_real(lo)?;
        let fhi = flo + map.integrate_real(lo, hi)?;
        if on_segment(w, flo, fhi, 1e-9 * scale, -1e-12) {
            return Ok((locate_with(&map, w, (lo, hi), tol_map)?, None));
        }
    }
    // The unbounded side left of the first prevertex.
    let hi = ends[0];
    let fhi = map.map_real(hi)?;
    let mut step = 1.0;
    for _ in 0..80 {
        let lo = hi - step;
        let flo = fhi - map.integrate_real(lo, hi)?;
        if on_segment(w, flo, fhi, 1e-9 * scale, 1e-3) {
            return Ok((locate_with(&map, w, (lo, hi), tol_map)?, None));
        }
        step *= 2.0;
    }
    Err(ScenarioError::Config(format!(
        "base point {w} is not on a side with negative prevertices (sides through the images of 0, 1 and infinity cannot carry slits)"
    )))
}

/// Turns a stage description into a slit plan for the given slit-free state.
pub fn build_plan(state: &AccessoryState, stage: &StageConfig, tol: &Tolerances) -> Result<SlitPlan, ScenarioError> {
    let map = ScMap::from_state(state)?;
    let pv = state.prevertices();
    let mut specs = Vec::with_capacity(stage.slits.len());
    for (i, sc) in stage.slits.iter().enumerate() {
        let (lambda0, vertex) = match sc.prevertex {
            Some(x) => {
                let v = pv.iter().find(|p| p.x == x).and_then(|p| match p.role {
                    Role::Fixed { vertex } => Some(vertex),
                    _ => None,
                });
                (x, v)
            }
            None => locate_base(state, sc.base_point, tol.tol_map)?,
        };
        let (sigmas, direction) = match vertex {
            None => {
                let side = map.derivative(Complex64::new(lambda0, 0.0))?;
                let side = side / side.norm();
                let dir = sc.direction.unwrap_or(side * Complex64::i());
                let s = match sc.exponents {
                    Some([a, b]) => (a, b),
                    None => side_slit_exponents(side, dir).map_err(|e| ScenarioError::Config(format!("slit {i}: {e}")))?,
                };
                (s, dir)
            }
            Some(k) => {
                let next = pv.iter().map(|p| p.x).find(|&x| x > lambda0).unwrap_or(0.0);
                let out = map.derivative(Complex64::new(0.5 * (lambda0 + next), 0.0))?;
                let out = out / out.norm();
                let alpha = state.polygon.alpha(k);
                let dir = sc
                    .direction
                    .unwrap_or_else(|| out * Complex64::from_polar(1.0, 0.5 * PI * alpha));
                let s = match sc.exponents {
                    Some([a, b]) => (a, b),
                    None => vertex_slit_exponents(out, dir, alpha).map_err(|e| ScenarioError::Config(format!("slit {i}: {e}")))?,
                };
                (s, dir)
            }
        };
        specs.push(SlitSpec {
            base_point: sc.base_point,
            direction: direction / direction.norm(),
            lambda0,
            sigma1: sigmas.0,
            sigma2: sigmas.1,
            ratio: sc.ratio,
            vertex,
        });
    }
    specs.sort_by(|a, b| a.lambda0.partial_cmp(&b.lambda0).unwrap());
    let mut plan = SlitPlan::new(specs, stage.target_l1);
    plan.epsilon = tol.epsilon;
    plan.merge_tol = tol.merge_tol;
    plan.cluster_tol = tol.cluster_tol;
    plan.ode_tol = tol.ode_tol;
    plan.control = stage.control.clone();
    plan.validate().map_err(|e| ScenarioError::Config(e.to_string()))?;
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonCheck {
    /// Max change of any parameter when Newton re-solves the end state.
    pub max_change: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub plan: SlitPlan,
    pub trace: Trace,
    pub merged: MergeResult,
    pub verify: Option<VerifyReport>,
    pub newton: Option<NewtonCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub name: String,
    pub initial: AccessoryState,
    pub stages: Vec<StageOutput>,
}

impl RunOutput {
    /// End state of the last stage (the initial state if there are none).
    pub fn final_state(&self) -> &AccessoryState {
        self.stages.last().map_or(&self.initial, |s| s.trace.last())
    }
}

/// Prescribed image of every finite prevertex at the end of a completed stage.
pub fn end_geometry(state: &AccessoryState, plan: &SlitPlan) -> Option<Vec<Complex64>> {
    let a0 = plan.slits[0].ratio;
    state
        .prevertices()
        .iter()
        .map(|p| match p.role {
            Role::Tip { slit } => {
                let g = &state.slits[slit];
                Some(g.base_point + g.direction * (plan.target_l1 * plan.slits[slit].ratio / a0))
            }
            r => state.target_image(r),
        })
        .collect()
}

fn newton_check(state: &AccessoryState, plan: &SlitPlan) -> Result<Option<NewtonCheck>, ScenarioError> {
    let Some(points) = end_geometry(state, plan) else {
        return Ok(None);
    };
    let infinity = (state.alpha_infinity() > 0.0)
        .then(|| state.polygon.vertex(state.polygon.len() - 1))
        .flatten();
    let targets = chain_lengths(&points, infinity);
    let res = solve_prevertices(state, &targets, &NewtonOptions::default())?;
    let a = state.moving();
    let b = res.state.moving();
    let mut change = (res.state.c.norm() - state.c.norm()).abs();
    for (p, q) in a.iter().zip(&b) {
        change = change.max((p.x - q.x).abs());
    }
    let residual = res
        .report
        .residuals
        .as_ref()
        .map_or(0.0, |r| r.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    Ok(Some(NewtonCheck {
        max_change: change,
        iterations: res.history.len(),
        residual,
    }))
}

/// Runs every stage. Stage `k + 1` starts from the flattened merge of stage `k`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    cfg.validate()?;
    let initial = initial_state(&cfg.initial)?;
    let mut state = initial.clone();
    let mut stages = Vec::with_capacity(cfg.stages.len());
    for (k, stage) in cfg.stages.iter().enumerate() {
        if k > 0 {
            let prev: &StageOutput = stages.last().unwrap();
            state = prev
                .merged
                .to_state()
                .map_err(|source| ScenarioError::Loewner { stage: k - 1, source })?;
        }
        let plan = build_plan(&state, stage, &cfg.tolerances)?;
        let wrap = |source| ScenarioError::Loewner { stage: k, source };
        let s0 = plan.attach(&state).map_err(wrap)?;
        let s0 = regularize_initial(&s0, &plan).map_err(wrap)?;
        let trace = evolve(&s0, &plan).map_err(wrap)?;
        let merged = merge_trace(&trace, plan.cluster_tol);
        let (verify, newton) = if cfg.outputs.verify {
            let v = verify_trace(&trace, &plan, &VerifyThresholds::default())?;
            let n = match trace.termination {
                Termination::Completed => newton_check(trace.last(), &plan)?,
                Termination::Degenerate { .. } => None,
            };
            (Some(v), n)
        } else {
            (None, None)
        };
        stages.push(StageOutput {
            plan,
            trace,
            merged,
            verify,
            newton,
        });
    }
    Ok(RunOutput {
        name: cfg.name.clone(),
        initial,
        stages,
    })
}

#[cfg(test)]
mod tests;
