//! Independent checks of an accessory-parameter state.
//!
//! [`side_lengths`] integrates `|f'|` between consecutive prevertices on the
//! real axis (no complex paths, no branch bookkeeping), and
//! [`solve_prevertices`] runs a damped Newton iteration on those lengths with
//! `d = |c|` and the moving prevertices as unknowns. [`verify_trace`] checks
//! the geometric claims of a run: straight slits, prescribed length ratios,
//! and vertices that stay put.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loewner::{SlitPlan, Trace};
use crate::quadrature::{integrate_singular, IntegrationOptions, QuadratureError};
use crate::sc_core::{AccessoryState, Role, ScError, ScMap};

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("side {index} ({from} to {to}) failed to integrate")]
    Side {
        index: usize,
        from: String,
        to: String,
        #[source]
        source: QuadratureError,
    },
    #[error("expected {expected} target lengths, got {got}")]
    TargetCount { expected: usize, got: usize },
    #[error("Jacobian is singular to working precision (condition estimate {0:e})")]
    Conditioning(f64),
    #[error("no admissible damped step after {0} halvings")]
    StepDamping(usize),
    #[error("no convergence in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Sc(#[from] ScError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideLengthReport {
    /// `l_ν` between consecutive finite prevertices, left to right.
    pub lengths: Vec<f64>,
    /// Labels of the two prevertices bounding each side.
    pub sides: Vec<(String, String)>,
    /// `lengths - targets`, when targets were supplied.
    pub residuals: Option<Vec<f64>>,
    /// 2-norm condition number of the Jacobian, when computed.
    pub condition: Option<f64>,
    pub d: f64,
    pub beta: f64,
}

/// Moduli of the integrand between consecutive prevertices. Positions are
/// shifted to the left end of each side so nearby prevertices keep their
/// relative precision.
fn lengths_for(d: f64, pts: &[(f64, f64)], opts: &IntegrationOptions, labels: &[String]) -> Result<Vec<f64>, OracleError> {
    (0..pts.len() - 1)
        .map(|k| {
            let (p, sp) = pts[k];
            let (q, sq) = pts[k + 1];
            let others: Vec<(f64, f64)> = pts
                .iter()
                .enumerate()
                .filter(|&(j, &(_, s))| j != k && j != k + 1 && s != 0.0)
                .map(|(_, &(x, s))| (p - x, s))
                .collect();
            let sing: Vec<Complex64> = others.iter().map(|&(o, _)| Complex64::new(-o, 0.0)).collect();
            let g = |u: f64| {
                let mut acc = 0.0;
                for &(o, s) in &others {
                    acc += s * (o + u).abs().ln();
                }
                Complex64::new(acc.exp(), 0.0)
            };
            let v = integrate_singular(g, 0.0, q - p, sp, sq, &sing, opts).map_err(|source| OracleError::Side {
                index: k,
                from: labels[k].clone(),
                to: labels[k + 1].clone(),
                source,
            })?;
            Ok(d * v.value.re)
        })
        .collect()
}

/// `∫ |f'|` from the end prevertex `pts[end]` out to infinity in direction
/// `dir` (+1 right, -1 left), substituting `x = X + dir s (1 - u) / u`. The
/// integrand becomes `s u^(α_n - 1) prod |u (X - x_k) + dir s (1 - u)|^σ_k`,
/// whose factor for `X` itself is exactly `(s (1 - u))^σ`.
fn tail_length(d: f64, pts: &[(f64, f64)], end: usize, dir: f64, alpha_inf: f64, opts: &IntegrationOptions) -> Result<f64, QuadratureError> {
    let (x_end, s_end) = pts[end];
    let s = if x_end == 0.0 { 1.0 } else { x_end.abs() };
    let others: Vec<(f64, f64)> = pts
        .iter()
        .enumerate()
        .filter(|&(j, &(_, sg))| j != end && sg != 0.0)
        .map(|(_, &(x, sg))| (x_end - x, sg))
        .collect();
    let sing: Vec<Complex64> = others
        .iter()
        .filter_map(|&(o, _)| {
            let den = o - dir * s;
            (den != 0.0).then(|| Complex64::new(-dir * s / den, 0.0))
        })
        .collect();
    let g = |u: f64| {
        let mut acc = s_end * s.ln();
        for &(o, sg) in &others {
            acc += sg * (u * o + dir * s * (1.0 - u)).abs().ln();
        }
        Complex64::new(s * acc.exp(), 0.0)
    };
    let v = integrate_singular(g, 0.0, 1.0, alpha_inf - 1.0, s_end, &sing, opts)?;
    Ok(d * v.value.re)
}

/// Finite sides, then (when the image of infinity is finite) the sides from
/// the last prevertex to infinity and from infinity to the first.
fn all_lengths(d: f64, pts: &[(f64, f64)], alpha_inf: f64, labels: &[String]) -> Result<Vec<f64>, OracleError> {
    let opts = IntegrationOptions::default();
    let mut l = lengths_for(d, pts, &opts, labels)?;
    if alpha_inf > 0.0 {
        let n = pts.len();
        let side = |index: usize, from: String, to: String| {
            move |source| OracleError::Side { index, from, to, source }
        };
        l.push(tail_length(d, pts, n - 1, 1.0, alpha_inf, &opts).map_err(side(n - 1, labels[n - 1].clone(), "inf".into()))?);
        l.push(tail_length(d, pts, 0, -1.0, alpha_inf, &opts).map_err(side(n, "inf".into(), labels[0].clone()))?);
    }
    Ok(l)
}

fn finite_points(state: &AccessoryState) -> (Vec<(f64, f64)>, Vec<String>) {
    let pv = state.prevertices();
    let pts = pv.iter().map(|p| (p.x, p.sigma)).collect();
    let labels = pv.iter().map(|p| p.role.label()).collect();
    (pts, labels)
}

/// `l_ν = |c| ∫ prod |x - a_k|^σ_k dx` for every side between consecutive
/// finite prevertices and, when the image of infinity is finite, the two
/// sides through it.
pub fn side_lengths(state: &AccessoryState) -> Result<SideLengthReport, OracleError> {
    let (pts, labels) = finite_points(state);
    let lengths = all_lengths(state.c.norm(), &pts, state.alpha_infinity(), &labels)?;
    let mut sides: Vec<(String, String)> = labels.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    if lengths.len() > sides.len() {
        sides.push((labels[labels.len() - 1].clone(), "inf".into()));
        sides.push(("inf".into(), labels[0].clone()));
    }
    Ok(SideLengthReport {
        lengths,
        sides,
        residuals: None,
        condition: None,
        d: state.c.norm(),
        beta: state.c.arg(),
    })
}

/// Side lengths of a chain of points (consecutive distances). With
/// `infinity`, the two sides through that point are appended, matching
/// [`side_lengths`].
pub fn chain_lengths(points: &[Complex64], infinity: Option<Complex64>) -> Vec<f64> {
    let mut l: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if let (Some(w), Some(first), Some(last)) = (infinity, points.first(), points.last()) {
        l.push((w - last).norm());
        l.push((first - w).norm());
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonIterate {
    /// `max |Φ - targets|` at the start of the iteration.
    pub residual: f64,
    /// Max-norm of the accepted step.
    pub step: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonResult {
    pub state: AccessoryState,
    pub history: Vec<NewtonIterate>,
    pub report: SideLengthReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            max_halvings: 30,
            fd_step: 1e-6,
        }
    }
}

/// Unknown vector `(d, moving prevertices...)` of a state.
fn unknowns(state: &AccessoryState) -> (Vec<f64>, Vec<Role>) {
    let mv = state.moving();
    let mut u = vec![state.c.norm()];
    u.extend(mv.iter().map(|p| p.x));
    (u, mv.iter().map(|p| p.role).collect())
}

fn with_unknowns(template: &AccessoryState, roles: &[Role], u: &[f64]) -> AccessoryState {
    let mut s = template.clone();
    s.c = Complex64::from_polar(u[0], template.c.arg());
    for (r, &x) in roles.iter().zip(&u[1..]) {
        match *r {
            Role::Fixed { vertex } => {
                if let Some(f) = s.fixed.iter_mut().find(|f| f.vertex == vertex) {
                    f.x = x;
                }
            }
            Role::Bank { slit, side: 0 } => s.slits[slit].a1 = x,
            Role::Bank { slit, .. } => s.slits[slit].a2 = x,
            Role::Tip { slit } => s.slits[slit].lambda = x,
            _ => {}
        }
    }
    s
}

fn admissible(u: &[f64]) -> bool {
    u[0] > 0.0 && u[1..].windows(2).all(|w| w[0] < w[1]) && u.last().is_some_and(|&x| u.len() == 1 || x < 0.0)
}

/// Newton iteration on the side-length map, starting from `guess`.
///
/// Targets are the sides of [`side_lengths`], in that order; `arg c` is kept
/// fixed. When the image of infinity is finite there are two more sides than
/// unknowns and each step is a least-squares (Gauss-Newton) step; the system
/// is consistent, so convergence stays quadratic. The Jacobian is built by
/// central differences with step `fd_step (1 + |u_j|)`.
pub fn solve_prevertices(guess: &AccessoryState, targets: &[f64], opts: &NewtonOptions) -> Result<NewtonResult, OracleError> {
    let (mut u, roles) = unknowns(guess);
    let n = u.len();
    let alpha_inf = guess.alpha_infinity();
    let m = if alpha_inf > 0.0 { n + 2 } else { n };
    if targets.len() != m {
        return Err(OracleError::TargetCount {
            expected: m,
            got: targets.len(),
        });
    }
    let eval = |u: &[f64]| -> Result<Vec<f64>, OracleError> {
        let s = with_unknowns(guess, &roles, u);
        let (pts, labels) = finite_points(&s);
        let l = all_lengths(u[0], &pts, alpha_inf, &labels)?;
        Ok(l.iter().zip(targets).map(|(a, b)| a - b).collect())
    };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut r = eval(&u)?;
    let mut history = Vec::new();
    let mut condition = None;
    for _ in 0..opts.max_iter {
        let res = inf(&r);
        if res <= opts.tol {
            let state = with_unknowns(guess, &roles, &u);
            let mut report = side_lengths(&state)?;
            report.residuals = Some(r);
            report.condition = condition;
            return Ok(NewtonResult { state, history, report });
        }
        let cols: Vec<Result<Vec<f64>, OracleError>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let h = opts.fd_step * (1.0 + u[j].abs());
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += h;
                um[j] -= h;
                let fp = eval(&up)?;
                let fm = eval(&um)?;
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            })
            .collect();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for (j, col) in cols.into_iter().enumerate() {
            let col = col?;
            for i in 0..m {
                jac[(i, j)] = col[i];
            }
        }
        let sv = jac.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let cond = smax / smin;
        condition = Some(cond);
        if !(cond < 1e14) {
            return Err(OracleError::Conditioning(cond));
        }
        let rhs = DVector::from_vec(r.clone());
        let step = if m == n {
            jac.lu().solve(&rhs).ok_or(OracleError::Conditioning(f64::INFINITY))?
        } else {
            jac.svd(true, true)
                .solve(&rhs, 1e-14 * smax)
                .map_err(|_| OracleError::Conditioning(cond))?
        };
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a - lam * s).collect();
            if admissible(&trial) {
                if let Ok(rt) = eval(&trial) {
                    if inf(&rt) < res || lam < 1.0 / 1024.0 {
                        accepted = Some((trial, rt));
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        let (trial, rt) = accepted.ok_or(OracleError::StepDamping(opts.max_halvings))?;
        history.push(NewtonIterate {
            residual: res,
            step: lam * step.amax(),
            damping: lam,
        });
        u = trial;
        r = rt;
    }
    let res = inf(&r);
    if res <= opts.tol {
        let state = with_unknowns(guess, &roles, &u);
        let mut report = side_lengths(&state)?;
        report.residuals = Some(r);
        report.condition = condition;
        return Ok(NewtonResult { state, history, report });
    }
    Err(OracleError::NotConverged {
        iterations: opts.max_iter,
        residual: res,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyThresholds {
    pub straightness: f64,
    pub ratio: f64,
    pub pinned: f64,
    /// Ratios are only checked once `t - t0 >= ratio_start * target`.
    pub ratio_start: f64,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        Self {
            straightness: 1e-5,
            ratio: 1e-4,
            pinned: 1e-6,
            ratio_start: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// Max distance of a slit tip from its ray.
    pub straightness: f64,
    /// Max `|L_i / L_1 - α_i / α_1|` once slits are long enough.
    pub ratio: f64,
    /// Max distance of a fixed vertex, the images of 0 and 1, or a slit base
    /// from its prescribed position.
    pub pinned: f64,
    /// Max `|L_1 - (t - t0)|`.
    pub length_param: f64,
    pub ordering_violations: usize,
    pub snapshots: usize,
    pub thresholds: VerifyThresholds,
    pub passed: bool,
    /// Labels of the checks that failed.
    pub failures: Vec<String>,
}

struct SnapshotCheck {
    straight: f64,
    ratio: f64,
    pinned: f64,
    length: f64,
    ordered: bool,
}

fn check_snapshot(s: &AccessoryState, plan: &SlitPlan, t0: f64, th: &VerifyThresholds) -> Result<SnapshotCheck, OracleError> {
    let map = ScMap::from_state(s)?;
    let images = map.prevertex_images()?;
    let image = |x: f64| images.iter().find(|(p, _)| *p == x).map(|(_, w)| *w).unwrap();
    let mut straight = 0.0f64;
    let mut pinned = 0.0f64;
    let mut lengths = Vec::with_capacity(s.slits.len());
    for g in &s.slits {
        let tip = image(g.lambda) - g.base_point;
        let along = (tip * g.direction.conj()).re;
        let off = if along >= 0.0 { (tip * g.direction.conj()).im.abs() } else { tip.norm() };
        straight = straight.max(off);
        lengths.push(tip.norm());
    }
    for p in s.prevertices() {
        if let Some(target) = s.target_image(p.role) {
            pinned = pinned.max((image(p.x) - target).norm());
        }
    }
    let mut ratio = 0.0f64;
    let dt = s.t - t0;
    if dt >= th.ratio_start * plan.target_l1 && lengths[0] > 0.0 {
        let a0 = plan.slits[0].ratio;
        for (i, l) in lengths.iter().enumerate() {
            ratio = ratio.max((l / lengths[0] - plan.slits[i].ratio / a0).abs());
        }
    }
    let mv = s.moving();
    let ordered = if s.t > t0 {
        mv.windows(2).all(|w| w[0].x < w[1].x) && mv.last().is_none_or(|p| p.x < 0.0)
    } else {
        mv.windows(2).all(|w| w[0].x <= w[1].x)
    };
    Ok(SnapshotCheck {
        straight,
        ratio,
        pinned,
        length: (lengths[0] - dt).abs(),
        ordered,
    })
}

/// Geometric verification of every snapshot of a trace.
pub fn verify_trace(trace: &Trace, plan: &SlitPlan, thresholds: &VerifyThresholds) -> Result<VerifyReport, OracleError> {
    let t0 = trace.snapshots[0].t;
    let checks: Vec<Result<SnapshotCheck, OracleError>> = trace
        .snapshots
        .par_iter()
        .map(|s| check_snapshot(s, plan, t0, thresholds))
        .collect();
    let mut rep = VerifyReport {
        straightness: 0.0,
        ratio: 0.0,
        pinned: 0.0,
        length_param: 0.0,
        ordering_violations: 0,
        snapshots: trace.snapshots.len(),
        thresholds: *thresholds,
        passed: true,
        failures: Vec::new(),
    };
    for c in checks {
        let c = c?;
        rep.straightness = rep.straightness.max(c.straight);
        rep.ratio = rep.ratio.max(c.ratio);
        rep.pinned = rep.pinned.max(c.pinned);
        rep.length_param = rep.length_param.max(c.length);
        if !c.ordered {
            rep.ordering_violations += 1;
        }
    }
    if rep.straightness > thresholds.straightness {
        rep.failures.push("straightness".into());
    }
    if rep.ratio > thresholds.ratio {
        rep.failures.push("ratio".into());
    }
    if rep.pinned > thresholds.pinned {
        rep.failures.push("pinned".into());
    }
    if rep.ordering_violations > 0 {
        rep.failures.push("ordering".into());
    }
    rep.passed = rep.failures.is_empty();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_like_half_strip() {
        // f' = x^{-1/2} (x - 1)^{-1/2} on [0, 1]: the side has length π.
        let mut s = AccessoryState::identity();
        let poly = crate::sc_core::PolygonSpec::new(
            vec![Some(Complex64::new(0.0, 0.0)), Some(Complex64::new(0.0, PI)), None],
            vec![0.5, 0.5, 0.0],
            0,
        )
        .unwrap();
        s.polygon = std::sync::Arc::new(poly);
        let rep = side_lengths(&s).unwrap();
        assert_eq!(rep.lengths.len(), 1);
        assert!((rep.lengths[0] - PI).abs() < 1e-12);
    }

    #[test]
    fn doubling_d_doubles_lengths() {
        let mut s = AccessoryState::identity();
        s.c = Complex64::new(0.0, 1.5);
        let a = side_lengths(&s).unwrap();
        s.c *= 2.0;
        let b = side_lengths(&s).unwrap();
        for (x, y) in a.lengths.iter().zip(&b.lengths) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn rectangle_sides_through_infinity() {
        // 2 x 1 rectangle with infinity at the middle of the top side.
        let s = crate::scenario::rectangle_state(2.0, 1.0).unwrap();
        let rep = side_lengths(&s).unwrap();
        let want = [1.0, 2.0, 1.0, 1.0, 1.0];
        assert_eq!(rep.lengths.len(), 5);
        for (l, w) in rep.lengths.iter().zip(want) {
            assert!((l - w).abs() < 1e-10, "{:?}", rep.lengths);
        }
        assert_eq!(rep.sides[3], ("1".to_string(), "inf".to_string()));
    }

    #[test]
    fn rectangle_gauss_newton() {
        let exact = crate::scenario::rectangle_state(3.0, 1.0).unwrap();
        let mut g = exact.clone();
        g.c *= 1.05;
        g.fixed[0].x *= 0.95;
        g.fixed[1].x *= 0.9;
        let opts = NewtonOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let r = solve_prevertices(&g, &[1.0, 3.0, 1.0, 1.5, 1.5], &opts).unwrap();
        assert!((r.state.fixed[0].x - exact.fixed[0].x).abs() < 1e-9);
        assert!((r.state.fixed[1].x - exact.fixed[1].x).abs() < 1e-9);
        assert!((r.state.c.norm() - exact.c.norm()).abs() < 1e-9);
    }

    #[test]
    fn chain_with_infinity() {
        let pts = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)];
        let l = chain_lengths(&pts, Some(Complex64::new(1.0, 1.0)));
        assert_eq!(l.len(), 4);
        assert!((l[2] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(l[3], 1.0);
    }

    #[test]
    fn wrong_target_count() {
        let s = AccessoryState::identity();
        assert!(matches!(
            solve_prevertices(&s, &[1.0, 2.0], &NewtonOptions::default()),
            Err(OracleError::TargetCount { .. })
        ));
    }
}
