//! Right-hand side of the parameter ODE and the quantities it is built from.
//!
//! Points are handled through a [`Frame`]: the moving prevertices in
//! increasing order followed by the fixed prevertices 0 and 1, with all
//! pairwise differences precomputed. During integration the differences come
//! from sums of consecutive gaps, which keeps full relative precision when
//! two prevertices are 1e-14 apart.

use num_complex::Complex64;

use super::LoewnerError;
use crate::sc_core::{AccessoryState, Role};

/// Role and exponent of every point in a frame, fixed for a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Moving prevertices in increasing order.
    pub roles: Vec<Role>,
    /// Exponents of the moving points, then of 0 and 1. Tips carry `1`.
    pub sigmas: Vec<f64>,
    /// Slot of each slit's tip in `roles`.
    pub tips: Vec<usize>,
    pub alpha_inf: f64,
}

impl Layout {
    pub fn of(state: &AccessoryState) -> Self {
        let pv = state.prevertices();
        let mut roles = Vec::new();
        let mut sigmas = Vec::new();
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for p in &pv {
            match p.role {
                Role::Origin => s0 = p.sigma,
                Role::One => s1 = p.sigma,
                r => {
                    roles.push(r);
                    sigmas.push(p.sigma);
                }
            }
        }
        sigmas.push(s0);
        sigmas.push(s1);
        let mut tips = vec![usize::MAX; state.slits.len()];
        for (k, r) in roles.iter().enumerate() {
            if let Role::Tip { slit } = *r {
                tips[slit] = k;
            }
        }
        Self {
            roles,
            sigmas,
            tips,
            alpha_inf: state.alpha_infinity(),
        }
    }

    pub fn moving_len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_tip(&self, k: usize) -> bool {
        k < self.roles.len() && matches!(self.roles[k], Role::Tip { .. })
    }
}

/// Positions and pairwise differences `d[i][j] = x_i - x_j` of the moving
/// points plus 0 and 1 (last two slots).
#[derive(Debug, Clone)]
pub struct Frame {
    pub x: Vec<f64>,
    d: Vec<f64>,
    n: usize,
}

impl Frame {
    pub fn diff(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// From absolute positions (moving points in increasing order).
    pub fn from_positions(moving: &[f64]) -> Self {
        let m = moving.len();
        let n = m + 2;
        let mut x = moving.to_vec();
        x.push(0.0);
        x.push(1.0);
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = x[i] - x[j];
            }
        }
        Self { x, d, n }
    }

    /// From the leftmost position and the consecutive gaps.
    pub fn from_gaps(x0: f64, gaps: &[f64]) -> Self {
        let m = gaps.len() + 1;
        let n = m + 2;
        let mut x = Vec::with_capacity(n);
        let mut acc = x0;
        x.push(acc);
        for g in gaps {
            acc += g;
            x.push(acc);
        }
        x.push(0.0);
        x.push(1.0);
        let mut d = vec![0.0; n * n];
        for j in 0..m {
            let mut s = 0.0;
            for i in j + 1..m {
                s += gaps[i - 1];
                d[i * n + j] = s;
                d[j * n + i] = -s;
            }
        }
        for i in 0..m {
            for j in m..n {
                d[i * n + j] = x[i] - x[j];
                d[j * n + i] = x[j] - x[i];
            }
        }
        d[m * n + m + 1] = -1.0;
        d[(m + 1) * n + m] = 1.0;
        Self { x, d, n }
    }

    /// Smallest gap between consecutive moving points, with the pair index.
    pub fn min_gap(&self) -> Option<(usize, f64)> {
        let m = self.n - 2;
        (0..m.saturating_sub(1))
            .map(|k| (k, self.diff(k + 1, k)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

fn check_distinct(layout: &Layout, f: &Frame) -> Result<(), LoewnerError> {
    let m = layout.moving_len();
    for k in 0..m.saturating_sub(1) {
        if !(f.diff(k + 1, k) > 0.0) {
            return Err(LoewnerError::Degenerate {
                left: layout.roles[k].label(),
                right: layout.roles[k + 1].label(),
                gap: f.diff(k + 1, k),
            });
        }
    }
    if m > 0 && !(f.x[m - 1] < 0.0) {
        return Err(LoewnerError::Degenerate {
            left: layout.roles[m - 1].label(),
            right: "0".into(),
            gap: -f.x[m - 1],
        });
    }
    Ok(())
}

/// `ln A_r` for every slit: the modulus of the SC integrand with the tip
/// factor removed, times `|λ_r| |λ_r - 1|^2`, without `|c|`.
pub fn log_speed_factors(layout: &Layout, f: &Frame) -> Result<Vec<f64>, LoewnerError> {
    check_distinct(layout, f)?;
    let n = f.len();
    let mut out = Vec::with_capacity(layout.tips.len());
    for &p in &layout.tips {
        let lam = f.x[p];
        let mut s = lam.abs().ln() + 2.0 * (lam - 1.0).abs().ln();
        for k in 0..n {
            if k == p || layout.sigmas[k] == 0.0 {
                continue;
            }
            s += layout.sigmas[k] * f.diff(p, k).abs().ln();
        }
        out.push(s);
    }
    Ok(out)
}

/// Normalized control `C_j = (α_j / A_j) / Σ_k (α_k / A_k)` from log speed factors.
pub fn normalized_control(ratios: &[f64], log_a: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = ratios.iter().zip(log_a).map(|(r, la)| r.ln() - la).collect();
    let wmax = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w.iter().map(|v| (v - wmax).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

/// Velocities of the moving points and `(dc/dt)/c` for given control values
/// (already rescaled if the length parametrization is in use).
pub fn velocities(layout: &Layout, f: &Frame, ctl: &[f64]) -> Result<(Vec<f64>, f64), LoewnerError> {
    check_distinct(layout, f)?;
    let m = layout.moving_len();
    let n = f.len();
    let tips = &layout.tips;
    let mut v = vec![0.0; m];
    for k in 0..m {
        let xk = f.x[k];
        if layout.is_tip(k) {
            let slit = match layout.roles[k] {
                Role::Tip { slit } => slit,
                _ => unreachable!(),
            };
            let cp = ctl[slit];
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for (l, &q) in tips.iter().enumerate() {
                if q == k {
                    continue;
                }
                let d = f.diff(k, q);
                s1 += ctl[l] * (f.x[q] - 1.0) / d;
                s2 += 1.0 / d;
            }
            let mut s3 = 0.0;
            for j in 0..n {
                if j == k || layout.is_tip(j) || layout.sigmas[j] == 0.0 {
                    continue;
                }
                s3 += layout.sigmas[j] / f.diff(k, j);
            }
            let km1 = xk - 1.0;
            let neg = xk * km1 * (s1 + cp * km1 * s2) + cp * (2.0 * xk - 1.0) * km1 + cp * xk * km1 * km1 * s3;
            v[k] = -neg;
        } else {
            let mut s = 0.0;
            for (l, &q) in tips.iter().enumerate() {
                s += ctl[l] * (f.x[q] - 1.0) / f.diff(k, q);
            }
            v[k] = -xk * (xk - 1.0) * s;
        }
    }
    let mut cdot = 0.0;
    for (l, &q) in tips.iter().enumerate() {
        cdot += ctl[l] * (f.x[q] - 1.0);
    }
    Ok((v, -layout.alpha_inf * cdot))
}

/// Both sides of the rational identity obtained by inserting the time
/// derivative of the SC integrand into the Loewner equation, at a point `z`.
/// The right-hand side involves only the current state and the control; the
/// left-hand side uses the supplied velocities.
pub fn residue_sides(
    layout: &Layout,
    f: &Frame,
    ctl: &[f64],
    vel: &[f64],
    log_c_rate: f64,
    z: Complex64,
) -> (Complex64, Complex64) {
    let n = f.len();
    let m = layout.moving_len();
    let mut lhs = Complex64::new(-log_c_rate, 0.0);
    let mut phi = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let s = layout.sigmas[k];
        let inv = 1.0 / (z - f.x[k]);
        if layout.is_tip(k) {
            lhs += vel[k] * inv;
            phi += inv;
        } else {
            if k < m {
                lhs += s * vel[k] * inv;
            }
            phi += s * inv;
        }
    }
    let mut a = Complex64::new(0.0, 0.0);
    let mut b = Complex64::new(0.0, 0.0);
    let mut c = 0.0;
    for (l, &q) in layout.tips.iter().enumerate() {
        let lam = f.x[q];
        let inv = 1.0 / (lam - z);
        a += ctl[l] * (lam - 1.0) * inv;
        b += ctl[l] * lam * (lam - 1.0).powi(2) * inv * inv;
        c += ctl[l] * (lam - 1.0);
    }
    let rhs = phi * z * (z - 1.0) * a + b - c;
    (lhs, rhs)
}

/// Moving positions of a state in layout order.
pub fn positions(layout: &Layout, state: &AccessoryState) -> Vec<f64> {
    layout
        .roles
        .iter()
        .map(|r| match *r {
            Role::Fixed { vertex } => state.fixed.iter().find(|f| f.vertex == vertex).unwrap().x,
            Role::Bank { slit, side: 0 } => state.slits[slit].a1,
            Role::Bank { slit, .. } => state.slits[slit].a2,
            Role::Tip { slit } => state.slits[slit].lambda,
            Role::Origin | Role::One => unreachable!(),
        })
        .collect()
}

/// Writes layout-ordered positions back into a copy of `template`.
pub fn with_positions(layout: &Layout, template: &AccessoryState, x: &[f64], t: f64, c: Complex64) -> AccessoryState {
    let mut s = template.clone();
    s.t = t;
    s.c = c;
    for (r, &v) in layout.roles.iter().zip(x) {
        match *r {
            Role::Fixed { vertex } => {
                if let Some(f) = s.fixed.iter_mut().find(|f| f.vertex == vertex) {
                    f.x = v;
                }
            }
            Role::Bank { slit, side: 0 } => s.slits[slit].a1 = v,
            Role::Bank { slit, .. } => s.slits[slit].a2 = v,
            Role::Tip { slit } => s.slits[slit].lambda = v,
            Role::Origin | Role::One => {}
        }
    }
    s
}
