//! Singularity-aware quadrature.
//!
//! Gauss-Jacobi rules integrate `(1 - x)^a (1 + x)^b g(x)` on `[-1, 1]` exactly
//! for polynomial `g` of degree `<= 2n - 1`. [`integrate_singular`] builds a
//! compound rule on top of them for integrands with algebraic endpoint
//! singularities and nearby (off-interval) singular points, which is the shape
//! of every Schwarz-Christoffel integral in this crate.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid rule parameters: order {order}, exponents ({a_exp}, {b_exp}); need order >= 1 and exponents > -1")]
    InvalidRule { order: usize, a_exp: f64, b_exp: f64 },
    #[error("invalid interval [{p}, {q}]")]
    InvalidInterval { p: f64, q: f64 },
    #[error("tolerance {tol:e} not reached on [{p}, {q}] at depth {depth}: estimate {estimate:e}")]
    NotConverged {
        p: f64,
        q: f64,
        depth: usize,
        tol: f64,
        estimate: f64,
    },
    #[error("elliptic modulus {0} outside [0, 1)")]
    EllipticDomain(f64),
}

/// Nodes and weights of a Gauss-Jacobi rule for the weight
/// `(1 - x)^a_exp (1 + x)^b_exp` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    a_exp: f64,
    b_exp: f64,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.a_exp, self.b_exp)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `sum_k w_k g(x_k)`, i.e. the weighted integral over `[-1, 1]`.
    pub fn apply<T, F>(&self, mut g: F) -> T
    where
        T: std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
        F: FnMut(f64) -> T,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| g(x) * w)
            .sum()
    }
}

/// `∫_{-1}^{1} (1 - x)^a (1 + x)^b dx = 2^(a+b+1) B(a+1, b+1)`.
pub fn jacobi_moment(a_exp: f64, b_exp: f64) -> f64 {
    ((a_exp + b_exp + 1.0) * 2f64.ln() + ln_gamma(a_exp + 1.0) + ln_gamma(b_exp + 1.0)
        - ln_gamma(a_exp + b_exp + 2.0))
    .exp()
}

/// Recurrence coefficients of the monic Jacobi polynomials: diagonal `alpha_k`
/// (k = 0..n) and squared off-diagonal `beta_k` (k = 1..n).
fn jacobi_recurrence(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = a + b;
    let mut diag = Vec::with_capacity(n);
    let mut offsq = Vec::with_capacity(n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let d = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        diag.push(d);
    }
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let bk = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        offsq.push(bk);
    }
    (diag, offsq)
}

/// Builds an `n`-point Gauss-Jacobi rule.
///
/// Nodes come from the symmetric tridiagonal Jacobi matrix (Golub-Welsch) and
/// are then polished by Newton iteration on the orthonormal recurrence; the
/// weights are the Christoffel numbers `mu0 / sum_k p_k(x)^2`.
pub fn gauss_jacobi(n: usize, a_exp: f64, b_exp: f64) -> Result<QuadratureRule, QuadratureError> {
    if n == 0 || !(a_exp > -1.0) || !(b_exp > -1.0) || !a_exp.is_finite() || !b_exp.is_finite() {
        return Err(QuadratureError::InvalidRule {
            order: n,
            a_exp,
            b_exp,
        });
    }
    let (diag, offsq) = jacobi_recurrence(n, a_exp, b_exp);
    let off: Vec<f64> = offsq.iter().map(|b| b.sqrt()).collect();
    let mu0 = jacobi_moment(a_exp, b_exp);

    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jm[(k, k)] = diag[k];
        if k + 1 < n {
            jm[(k, k + 1)] = off[k];
            jm[(k + 1, k)] = off[k];
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // Orthonormal recurrence: returns (p_n(x), p_n'(x), sum_{k<n} p_k(x)^2).
    let eval = |x: f64| -> (f64, f64, f64) {
        let mut p_prev = 0.0;
        let mut p = 1.0 / mu0.sqrt();
        let mut dp_prev = 0.0;
        let mut dp = 0.0;
        let mut sumsq = 0.0;
        for k in 0..n {
            sumsq += p * p;
            let b_prev = if k == 0 { 0.0 } else { off[k - 1] };
            let b_next = if k + 1 < n { off[k] } else { 1.0 };
            let p_next = ((x - diag[k]) * p - b_prev * p_prev) / b_next;
            let dp_next = (p + (x - diag[k]) * dp - b_prev * dp_prev) / b_next;
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
        }
        (p, dp, sumsq)
    };

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = eval(*x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() <= 1e-17 {
                break;
            }
        }
        let (_, _, sumsq) = eval(*x);
        weights.push(1.0 / sumsq);
    }
    // Symmetric rules: pin the middle node.
    if a_exp == b_exp && n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        a_exp,
        b_exp,
    })
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared, lazily built rule. Rules are immutable once inserted.
pub fn cached_rule(n: usize, a_exp: f64, b_exp: f64) -> Result<Arc<QuadratureRule>, QuadratureError> {
    let key = (n, a_exp.to_bits(), b_exp.to_bits());
    if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(gauss_jacobi(n, a_exp, b_exp)?);
    let mut cache = rule_cache().lock().unwrap();
    Ok(Arc::clone(cache.entry(key).or_insert(rule)))
}

/// Knobs for [`integrate_singular`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    /// Nodes per panel; the error estimate compares against half this order.
    pub order: usize,
    /// Maximum bisection depth for any panel.
    pub max_depth: usize,
    /// Absolute tolerance on the summed error estimate.
    pub tol: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            order: 24,
            max_depth: 60,
            tol: 1e-13,
        }
    }
}

/// One accepted panel of a compound rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub start: f64,
    pub end: f64,
    /// Distance from the panel to the nearest off-panel singularity.
    pub clearance: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub panels: Vec<Panel>,
}

/// Distance from a (complex) point to the real segment `[a, b]`.
fn distance_to_segment(s: Complex64, a: f64, b: f64) -> f64 {
    let x = s.re.clamp(a, b);
    ((s.re - x).powi(2) + s.im.powi(2)).sqrt()
}

fn clearance(singularities: &[Complex64], a: f64, b: f64) -> f64 {
    singularities
        .iter()
        .map(|&s| distance_to_segment(s, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Algebraic endpoint factor `|x - at|^exp` attached to one end of a half interval.
#[derive(Clone, Copy)]
struct EndFactor {
    at: f64,
    exp: f64,
}

/// Computes `∫_p^q (x - p)^left_exp (q - x)^right_exp f(x) dx` where `f` is
/// analytic on `[p, q]` and its singular points are listed in `singularities`
/// (complex positions in the same real coordinate as `p`, `q`).
///
/// The interval is split at the midpoint so each half carries at most one
/// singular endpoint, and each half is subdivided until every panel is no
/// longer than its distance to the nearest singularity. A panel whose
/// order-doubling estimate misses its share of `tol` is bisected again.
pub fn integrate_singular<F>(
    f: F,
    p: f64,
    q: f64,
    left_exp: f64,
    right_exp: f64,
    singularities: &[Complex64],
    opts: &IntegrationOptions,
) -> Result<Integral, QuadratureError>
where
    F: Fn(f64) -> Complex64,
{
    if !(p < q) || !p.is_finite() || !q.is_finite() {
        return Err(QuadratureError::InvalidInterval { p, q });
    }
    if !(left_exp > -1.0) || !(right_exp > -1.0) {
        return Err(QuadratureError::InvalidRule {
            order: opts.order,
            a_exp: right_exp,
            b_exp: left_exp,
        });
    }
    let mid = 0.5 * (p + q);
    let mut out = Integral {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
        panels: Vec::new(),
    };

    // On each half the far endpoint factor is analytic and folded into the integrand.
    let mut sing_left = singularities.to_vec();
    if right_exp != 0.0 {
        sing_left.push(Complex64::new(q, 0.0));
    }
    let g_left = |x: f64| {
        if right_exp == 0.0 {
            f(x)
        } else {
            f(x) * (q - x).powf(right_exp)
        }
    };
    let mut sing_right = singularities.to_vec();
    if left_exp != 0.0 {
        sing_right.push(Complex64::new(p, 0.0));
    }
    let g_right = |x: f64| {
        if left_exp == 0.0 {
            f(x)
        } else {
            f(x) * (x - p).powf(left_exp)
        }
    };

    let half_tol = 0.5 * opts.tol;
    let ctx_l = Half {
        g: &g_left,
        end: EndFactor { at: p, exp: left_exp },
        singularities: &sing_left,
        tol: half_tol,
        len: mid - p,
        opts,
    };
    ctx_l.compound(p, mid, 0, &mut out)?;
    let ctx_r = Half {
        g: &g_right,
        end: EndFactor { at: q, exp: right_exp },
        singularities: &sing_right,
        tol: half_tol,
        len: q - mid,
        opts,
    };
    ctx_r.compound(mid, q, 0, &mut out)?;
    Ok(out)
}

struct Half<'a> {
    g: &'a dyn Fn(f64) -> Complex64,
    end: EndFactor,
    singularities: &'a [Complex64],
    tol: f64,
    len: f64,
    opts: &'a IntegrationOptions,
}

impl Half<'_> {
    fn compound(&self, a: f64, b: f64, depth: usize, out: &mut Integral) -> Result<(), QuadratureError> {
        let weighted = self.end.exp != 0.0;
        let touches = weighted && (self.end.at == a || self.end.at == b);
        let mut clear = clearance(self.singularities, a, b);
        if weighted && !touches {
            clear = clear.min(distance_to_segment(Complex64::new(self.end.at, 0.0), a, b));
        }
        if b - a <= clear {
            let (value, err) = self.panel(a, b, touches)?;
            // Tolerance is shared in proportion to panel length, with a floor so
            // tiny graded panels near singular points are not over-constrained.
            let share = (self.tol * ((b - a) / self.len).max(1e-3)).max(64.0 * f64::EPSILON * value.norm());
            if err <= share || depth >= self.opts.max_depth {
                if err > share {
                    return Err(QuadratureError::NotConverged {
                        p: a,
                        q: b,
                        depth,
                        tol: share,
                        estimate: err,
                    });
                }
                out.value += value;
                out.error += err;
                out.panels.push(Panel {
                    start: a,
                    end: b,
                    clearance: clear,
                    error: err,
                });
                return Ok(());
            }
        } else if depth >= self.opts.max_depth {
            return Err(QuadratureError::NotConverged {
                p: a,
                q: b,
                depth,
                tol: self.tol,
                estimate: f64::INFINITY,
            });
        }
        let m = 0.5 * (a + b);
        self.compound(a, m, depth + 1, out)?;
        self.compound(m, b, depth + 1, out)
    }

    /// Single-panel value with the order `n` rule and error estimate `|Q_n - Q_{n/2}|`.
    fn panel(&self, a: f64, b: f64, touches: bool) -> Result<(Complex64, f64), QuadratureError> {
        let half = 0.5 * (b - a);
        let centre = 0.5 * (a + b);
        let e = self.end.exp;
        // x = centre + half * u; (x - a) = half (1 + u), (b - x) = half (1 - u).
        let (a_exp, b_exp, scale) = if !touches {
            (0.0, 0.0, half)
        } else if self.end.at == a {
            (0.0, e, half * half.powf(e))
        } else {
            (e, 0.0, half * half.powf(e))
        };
        let g = |u: f64| {
            let x = centre + half * u;
            let v = (self.g)(x);
            if e != 0.0 && !touches {
                v * (x - self.end.at).abs().powf(e)
            } else {
                v
            }
        };
        let order = self.opts.order;
        let hi = cached_rule(order, a_exp, b_exp)?;
        let lo = cached_rule((order / 2).max(1), a_exp, b_exp)?;
        let q_hi: Complex64 = hi.apply(g) * scale;
        let q_lo: Complex64 = lo.apply(g) * scale;
        Ok((q_hi, (q_hi - q_lo).norm()))
    }
}

/// Complete elliptic integral of the first kind `K(k)` (modulus convention),
/// via the arithmetic-geometric mean `K = π / (2 AGM(1, sqrt(1 - k²)))`.
pub fn elliptic_k(k: f64) -> Result<f64, QuadratureError> {
    if !(0.0..1.0).contains(&k) {
        return Err(QuadratureError::EllipticDomain(k));
    }
    Ok(PI / (2.0 * agm(1.0, ((1.0 - k) * (1.0 + k)).sqrt())))
}

/// Arithmetic-geometric mean of two non-negative numbers.
pub fn agm(mut a: f64, mut g: f64) -> f64 {
    for _ in 0..64 {
        if (a - g).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + g);
        g = (a * g).sqrt();
        a = an;
    }
    a
}
