use std::f64::consts::PI;

use num_complex::Complex64;

use super::{AccessoryState, ScError};
use crate::quadrature::{integrate_singular, IntegrationOptions, QuadratureError};

/// `log w` with the branch cut running straight down from 0, so the argument
/// lies in `[-pi/2, 3pi/2)`. A negative real `w` with a signed-zero imaginary
/// part gets argument `pi` either way.
#[inline]
pub fn log_down(w: Complex64) -> Complex64 {
    let mut a = w.im.atan2(w.re);
    if a < -0.5 * PI {
        a += 2.0 * PI;
    }
    Complex64::new(w.norm().ln(), a)
}

fn is_analytic_exponent(s: f64) -> bool {
    s >= 0.0 && s.fract() == 0.0
}

/// Schwarz-Christoffel map `f(z) = origin + c ∫_0^z prod (zeta - x_k)^{sigma_k} d zeta`
/// for a sorted list of real prevertices. Coincident prevertices are combined
/// into one factor with the summed exponent.
#[derive(Debug, Clone)]
pub struct ScMap {
    c: Complex64,
    origin: Complex64,
    xs: Vec<f64>,
    sigmas: Vec<f64>,
    opts: IntegrationOptions,
}

impl ScMap {
    pub fn new(c: Complex64, origin: Complex64, prevertices: &[(f64, f64)]) -> Result<Self, ScError> {
        let mut pv: Vec<(f64, f64)> = prevertices.to_vec();
        if pv.iter().any(|(x, s)| !x.is_finite() || !s.is_finite()) {
            return Err(ScError::InvalidState("non-finite prevertex or exponent".into()));
        }
        pv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut xs: Vec<f64> = Vec::with_capacity(pv.len());
        let mut sigmas: Vec<f64> = Vec::with_capacity(pv.len());
        for (x, s) in pv {
            if xs.last() == Some(&x) {
                *sigmas.last_mut().unwrap() += s;
            } else {
                xs.push(x);
                sigmas.push(s);
            }
        }
        if !xs.contains(&0.0) {
            let k = xs.partition_point(|&x| x < 0.0);
            xs.insert(k, 0.0);
            sigmas.insert(k, 0.0);
        }
        Ok(Self {
            c,
            origin,
            xs,
            sigmas,
            opts: IntegrationOptions::default(),
        })
    }

    pub fn from_state(state: &AccessoryState) -> Result<Self, ScError> {
        let pv: Vec<(f64, f64)> = state.prevertices().iter().map(|p| (p.x, p.sigma)).collect();
        Self::new(state.c, state.polygon.origin_vertex(), &pv)
    }

    pub fn with_options(mut self, opts: IntegrationOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn options(&self) -> &IntegrationOptions {
        &self.opts
    }

    pub fn c(&self) -> Complex64 {
        self.c
    }

    /// Distinct prevertex positions and their (combined) exponents.
    pub fn prevertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.sigmas.iter().copied())
    }

    fn index_of(&self, x: f64) -> Option<usize> {
        self.xs.iter().position(|&p| p == x)
    }

    /// `f'(z)`. Fails on a prevertex and below the real axis.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64, ScError> {
        if z.im < 0.0 {
            return Err(ScError::OutsideDomain(z));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &s) in self.xs.iter().zip(&self.sigmas) {
            if s == 0.0 {
                continue;
            }
            let w = z - x;
            if w.norm() == 0.0 {
                return Err(ScError::SingularPoint { z, x });
            }
            acc += s * log_down(w);
        }
        Ok(self.c * acc.exp())
    }

    /// `f(z)` on the closed upper half-plane.
    pub fn map(&self, z: Complex64) -> Result<Complex64, ScError> {
        if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(ScError::OutsideDomain(z));
        }
        if z.im == 0.0 {
            return self.map_real(z.re);
        }
        Ok(self.origin + self.integrate_from_origin(z)?)
    }

    /// `∫_0^z f'` for `z` strictly inside the upper half-plane.
    fn integrate_from_origin(&self, z: Complex64) -> Result<Complex64, ScError> {
        let i0 = self.index_of(0.0);
        let dmin = self
            .xs
            .iter()
            .map(|&x| (z - x).norm())
            .fold(f64::INFINITY, f64::min);
        let delta = 0.5 * dmin;
        let zero = Complex64::new(0.0, 0.0);
        let clear = self
            .xs
            .iter()
            .filter(|&&x| x != 0.0)
            .all(|&x| distance_to_segment(Complex64::new(x, 0.0), zero, z) >= delta);
        if clear {
            return self.leg(zero, i0, z, None);
        }
        let h = z.im.max(delta);
        let mid = Complex64::new(0.0, h);
        Ok(self.leg(zero, i0, mid, None)? + self.leg(mid, None, z, None)?)
    }

    /// `f(x)` for real `x`, integrating along the real axis from 0.
    pub fn map_real(&self, x: f64) -> Result<Complex64, ScError> {
        if x == 0.0 {
            return Ok(self.origin);
        }
        Ok(self.origin + self.integrate_real(0.0, x)?)
    }

    /// `∫_a^b f'(x) dx` along the real axis, split at every prevertex in between.
    pub fn integrate_real(&self, a: f64, b: f64) -> Result<Complex64, ScError> {
        if a == b {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut stops: Vec<(f64, Option<usize>)> = vec![(a, self.index_of(a))];
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let inner: Vec<usize> = (0..self.xs.len())
            .filter(|&k| self.xs[k] > lo && self.xs[k] < hi)
            .collect();
        if a < b {
            stops.extend(inner.iter().map(|&k| (self.xs[k], Some(k))));
        } else {
            stops.extend(inner.iter().rev().map(|&k| (self.xs[k], Some(k))));
        }
        stops.push((b, self.index_of(b)));
        let mut total = Complex64::new(0.0, 0.0);
        for w in stops.windows(2) {
            let (p, ip) = w[0];
            let (q, iq) = w[1];
            total += self.leg(Complex64::new(p, 0.0), ip, Complex64::new(q, 0.0), iq)?;
        }
        Ok(total)
    }

    /// Images of every distinct prevertex, sweeping outward from 0 along the
    /// real axis so each leg is integrated once.
    pub fn prevertex_images(&self) -> Result<Vec<(f64, Complex64)>, ScError> {
        let k0 = self.index_of(0.0).expect("0 is always present");
        let mut out = vec![(0.0, self.origin); self.xs.len()];
        for k in (0..k0).rev() {
            let prev = out[k + 1].1;
            let w = prev + self.leg(Complex64::new(self.xs[k + 1], 0.0), Some(k + 1), Complex64::new(self.xs[k], 0.0), Some(k))?;
            out[k] = (self.xs[k], w);
        }
        for k in k0 + 1..self.xs.len() {
            let prev = out[k - 1].1;
            let w = prev + self.leg(Complex64::new(self.xs[k - 1], 0.0), Some(k - 1), Complex64::new(self.xs[k], 0.0), Some(k))?;
            out[k] = (self.xs[k], w);
        }
        Ok(out)
    }

    /// `∫ f'` along the straight segment `z0 -> z1`, neither end a prevertex.
    pub fn integrate_segment(&self, z0: Complex64, z1: Complex64) -> Result<Complex64, ScError> {
        let i0 = if z0.im == 0.0 { self.index_of(z0.re) } else { None };
        let i1 = if z1.im == 0.0 { self.index_of(z1.re) } else { None };
        self.leg(z0, i0, z1, i1)
    }

    /// Straight leg from `start` to `end`; either end may be a prevertex (by index).
    /// Each half is integrated outward from its own end, so distances to
    /// prevertices clustered near either end are formed without cancellation.
    fn leg(&self, start: Complex64, i_start: Option<usize>, end: Complex64, i_end: Option<usize>) -> Result<Complex64, ScError> {
        if start == end {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mid = 0.5 * (start + end);
        let first = self.ray(start, i_start, mid).map_err(|source| ScError::Integration { from: start, to: end, source })?;
        let second = self.ray(end, i_end, mid).map_err(|source| ScError::Integration { from: start, to: end, source })?;
        Ok(first - second)
    }

    /// `∫ f'` from `start` (possibly a prevertex) to a regular point `end`.
    /// The integrand is written as `u^{s_start} g(u)` in the arclength
    /// parameter `u`, so the endpoint singularity goes to Gauss-Jacobi.
    fn ray(&self, start: Complex64, i_start: Option<usize>, end: Complex64) -> Result<Complex64, QuadratureError> {
        let delta = end - start;
        let len = delta.norm();
        let e = if delta.im == 0.0 {
            Complex64::new(delta.re.signum(), 0.0)
        } else {
            delta / len
        };
        let s_start = i_start.map_or(0.0, |k| self.sigmas[k]);
        let constant = if s_start != 0.0 {
            s_start * log_down(e)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let mut offsets: Vec<(Complex64, f64)> = Vec::with_capacity(self.xs.len());
        let mut singular: Vec<Complex64> = Vec::new();
        for k in 0..self.xs.len() {
            let s = self.sigmas[k];
            if Some(k) == i_start || s == 0.0 {
                continue;
            }
            // zeta - x_k = (start - x_k) + u e; the offset is exact for nearby points.
            let d = Complex64::new(start.re - self.xs[k], start.im);
            offsets.push((d, s));
            if !is_analytic_exponent(s) {
                singular.push(-d * e.conj());
            }
        }
        let c = self.c;
        let g = |u: f64| {
            let mut acc = constant;
            for &(d, s) in &offsets {
                acc += s * log_down(d + e * u);
            }
            c * acc.exp()
        };
        let res = integrate_singular(g, 0.0, len, s_start, 0.0, &singular, &self.opts)?;
        Ok(res.value * e)
    }
}

fn distance_to_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a) * d.conj()).re / len2;
    let s = s.clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}

pub fn sc_derivative(state: &AccessoryState, z: Complex64) -> Result<Complex64, ScError> {
    ScMap::from_state(state)?.derivative(z)
}

pub fn sc_map(state: &AccessoryState, z: Complex64) -> Result<Complex64, ScError> {
    ScMap::from_state(state)?.map(z)
}

pub fn sc_map_with(state: &AccessoryState, z: Complex64, opts: IntegrationOptions) -> Result<Complex64, ScError> {
    ScMap::from_state(state)?.with_options(opts).map(z)
}

/// Default tolerance on `|f(x) - w|` for [`locate_prevertex`].
pub const TOL_MAP: f64 = 1e-9;

/// Finds the real preimage of a boundary point `w` inside `bracket`.
///
/// The boundary image of the bracket is assumed to be a straight monotone
/// piece of one side. The root is found by Illinois regula falsi with
/// bisection fallback on the signed projection onto that side.
pub fn locate_prevertex(state: &AccessoryState, w: Complex64, bracket: (f64, f64)) -> Result<f64, ScError> {
    locate_with(&ScMap::from_state(state)?, w, bracket, TOL_MAP)
}

pub fn locate_with(map: &ScMap, w: Complex64, bracket: (f64, f64), tol: f64) -> Result<f64, ScError> {
    let (mut lo, mut hi) = bracket;
    let fail = |lo: f64, hi: f64, reason: String| ScError::RootNotFound { target: w, lo, hi, reason };
    if !(lo < hi) {
        return Err(fail(lo, hi, "empty bracket".into()));
    }
    let f_lo = map.map_real(lo)?;
    let f_hi = f_lo + map.integrate_real(lo, hi)?;
    let span = f_hi - f_lo;
    if span.norm() == 0.0 {
        return Err(fail(lo, hi, "bracket maps to a single point".into()));
    }
    let u = span / span.norm();
    let eval = |x: f64| -> Result<(Complex64, f64), ScError> {
        let fx = f_lo + map.integrate_real(bracket.0, x)?;
        Ok((fx, ((fx - w) * u.conj()).re))
    };
    let mut g_lo = ((f_lo - w) * u.conj()).re;
    let mut g_hi = ((f_hi - w) * u.conj()).re;
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(fail(lo, hi, "target is not between the images of the bracket ends".into()));
    }
    let scale = span.norm();
    let mut best = if -g_lo < g_hi { (lo, f_lo) } else { (hi, f_hi) };
    let mut side = 0i8;
    for _ in 0..200 {
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300) {
            break;
        }
        let mut x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(x > lo && x < hi) || !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        let (fx, gx) = eval(x)?;
        best = (x, fx);
        if gx.abs() <= 1e-15 * scale {
            break;
        }
        if gx < 0.0 {
            lo = x;
            g_lo = gx;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            g_hi = gx;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        // Regula falsi can stall on one end; force progress.
        if hi - lo > 0.5 * width {
            let m = 0.5 * (lo + hi);
            let (fm, gm) = eval(m)?;
            best = (m, fm);
            if gm < 0.0 {
                lo = m;
                g_lo = gm;
            } else {
                hi = m;
                g_hi = gm;
            }
            side = 0;
        }
    }
    let (x, fx) = best;
    let miss = (fx - w).norm();
    if miss > tol {
        return Err(fail(lo, hi, format!("closest image is {miss:e} away from the target")));
    }
    Ok(x)
}

pub fn slit_endpoint(state: &AccessoryState, i: usize) -> Result<Complex64, ScError> {
    let s = state.slits.get(i).ok_or(ScError::SlitIndex {
        index: i,
        count: state.slits.len(),
    })?;
    ScMap::from_state(state)?.map_real(s.lambda)
}

pub fn slit_length(state: &AccessoryState, i: usize) -> Result<f64, ScError> {
    let tip = slit_endpoint(state, i)?;
    Ok((tip - state.slits[i].base_point).norm())
}
