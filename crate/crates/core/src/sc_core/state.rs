use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PolygonSpec, ScError};

/// Tolerance for the exponent-sum identity.
pub const EXPONENT_SUM_TOL: f64 = 1e-12;

/// One growing slit: the prevertex triple `a1 <= lambda <= a2` with the two
/// bank exponents. The tip exponent is `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitGroup {
    pub a1: f64,
    pub lambda: f64,
    pub a2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub base_point: Complex64,
    /// Unit vector pointing from the base into the domain.
    pub direction: Complex64,
    /// Set when the slit starts at a polygon vertex; that vertex's own factor
    /// is then replaced by the two bank factors.
    #[serde(default)]
    pub vertex: Option<usize>,
}

impl SlitGroup {
    /// Zero-length slit with all three prevertices at `x`.
    pub fn collapsed(x: f64, sigma1: f64, sigma2: f64, base_point: Complex64, direction: Complex64) -> Self {
        Self {
            a1: x,
            lambda: x,
            a2: x,
            sigma1,
            sigma2,
            base_point,
            direction: direction / direction.norm(),
            vertex: None,
        }
    }

    pub fn at_vertex(mut self, vertex: usize) -> Self {
        self.vertex = Some(vertex);
        self
    }
}

/// Bank exponents `(sigma1, sigma2)` for a slit leaving the interior of a side
/// with direction `side_dir` (boundary orientation) at angle `phi` measured
/// from the side into the domain: `alpha1 = 1 - phi/pi`, `alpha2 = phi/pi`.
pub fn side_slit_exponents(side_dir: Complex64, slit_dir: Complex64) -> Result<(f64, f64), ScError> {
    let phi = (slit_dir / side_dir).arg();
    if !(phi > 0.0 && phi < PI) {
        return Err(ScError::InvalidState(format!(
            "slit direction {slit_dir} does not point into the domain from a side with direction {side_dir}"
        )));
    }
    let a2 = phi / PI;
    Ok((-a2, a2 - 1.0))
}

/// Bank exponents for a slit leaving vertex `A_k` with interior angle
/// `pi alpha_k`. `out_dir` is the direction of the side leaving the vertex.
/// The angle from `out_dir` to the slit splits `alpha_k` into two parts.
pub fn vertex_slit_exponents(out_dir: Complex64, slit_dir: Complex64, alpha_k: f64) -> Result<(f64, f64), ScError> {
    let mut phi = (slit_dir / out_dir).arg();
    if phi <= 0.0 {
        phi += 2.0 * PI;
    }
    let a2 = phi / PI;
    let a1 = alpha_k - a2;
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(ScError::InvalidState(format!(
            "slit direction {slit_dir} leaves the vertex outside its interior angle"
        )));
    }
    Ok((a1 - 1.0, a2 - 1.0))
}

/// A prevertex of a free polygon vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPrevertex {
    pub x: f64,
    /// Index into the (normalized) polygon vertex list.
    pub vertex: usize,
}

/// What a prevertex is the preimage of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Fixed { vertex: usize },
    Origin,
    One,
    /// `side` is 0 for `a_{i1}` and 1 for `a_{i2}`.
    Bank { slit: usize, side: u8 },
    Tip { slit: usize },
}

impl Role {
    pub fn is_moving(self) -> bool {
        !matches!(self, Role::Origin | Role::One)
    }

    pub fn label(self) -> String {
        match self {
            Role::Fixed { vertex } => format!("a{}", vertex + 1),
            Role::Origin => "0".into(),
            Role::One => "1".into(),
            Role::Bank { slit, side } => format!("a{}{}", slit + 1, side + 1),
            Role::Tip { slit } => format!("lambda{}", slit + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prevertex {
    pub x: f64,
    pub sigma: f64,
    pub role: Role,
}

/// Accessory parameters of the SC map at one value of the evolution parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessoryState {
    pub t: f64,
    pub c: Complex64,
    pub fixed: Vec<FixedPrevertex>,
    pub slits: Vec<SlitGroup>,
    pub polygon: Arc<PolygonSpec>,
}

impl AccessoryState {
    /// State with no slits. `fixed` lists prevertices for vertices `0..n-3` in order.
    pub fn without_slits(polygon: Arc<PolygonSpec>, c: Complex64, fixed_x: &[f64]) -> Result<Self, ScError> {
        let fixed = fixed_x
            .iter()
            .enumerate()
            .map(|(k, &x)| FixedPrevertex { x, vertex: k })
            .collect();
        let s = Self {
            t: 0.0,
            c,
            fixed,
            slits: Vec::new(),
            polygon,
        };
        s.validate()?;
        Ok(s)
    }

    /// Identity map of the upper half-plane: polygon `0, 1, infinity`.
    pub fn identity() -> Self {
        let polygon = PolygonSpec::new(
            vec![Some(Complex64::new(0.0, 0.0)), Some(Complex64::new(1.0, 0.0)), None],
            vec![1.0, 1.0, -1.0],
            0,
        )
        .expect("half-plane polygon is valid");
        Self {
            t: 0.0,
            c: Complex64::new(1.0, 0.0),
            fixed: Vec::new(),
            slits: Vec::new(),
            polygon: Arc::new(polygon),
        }
    }

    pub fn alpha_infinity(&self) -> f64 {
        self.polygon.alpha_infinity()
    }

    /// All finite prevertices (including 0 and 1) sorted by position.
    pub fn prevertices(&self) -> Vec<Prevertex> {
        let p = &self.polygon;
        let mut out = Vec::with_capacity(self.fixed.len() + 3 * self.slits.len() + 2);
        for f in &self.fixed {
            out.push(Prevertex {
                x: f.x,
                sigma: p.alpha(f.vertex) - 1.0,
                role: Role::Fixed { vertex: f.vertex },
            });
        }
        for (i, s) in self.slits.iter().enumerate() {
            out.push(Prevertex {
                x: s.a1,
                sigma: s.sigma1,
                role: Role::Bank { slit: i, side: 0 },
            });
            out.push(Prevertex {
                x: s.lambda,
                sigma: 1.0,
                role: Role::Tip { slit: i },
            });
            out.push(Prevertex {
                x: s.a2,
                sigma: s.sigma2,
                role: Role::Bank { slit: i, side: 1 },
            });
        }
        out.push(Prevertex {
            x: 0.0,
            sigma: p.alpha_origin() - 1.0,
            role: Role::Origin,
        });
        out.push(Prevertex {
            x: 1.0,
            sigma: p.alpha_one() - 1.0,
            role: Role::One,
        });
        // Stable sort keeps a1, lambda, a2 in order when they coincide at t = 0.
        out.sort_by(|u, v| u.x.partial_cmp(&v.x).unwrap_or(std::cmp::Ordering::Equal));
        out
    }

    /// Moving prevertices only (everything except 0 and 1), sorted.
    pub fn moving(&self) -> Vec<Prevertex> {
        self.prevertices().into_iter().filter(|p| p.role.is_moving()).collect()
    }

    /// Image the prevertex is pinned to, when known in advance (everything but slit tips).
    pub fn target_image(&self, role: Role) -> Option<Complex64> {
        match role {
            Role::Fixed { vertex } => self.polygon.vertex(vertex),
            Role::Origin => Some(self.polygon.origin_vertex()),
            Role::One => Some(self.polygon.one_vertex()),
            Role::Bank { slit, .. } => Some(self.slits[slit].base_point),
            Role::Tip { .. } => None,
        }
    }

    /// `sum of finite exponents (tips count +1) + 1 + alpha_n`, zero for a consistent state.
    pub fn exponent_sum_defect(&self) -> f64 {
        let s: f64 = self.prevertices().iter().map(|p| p.sigma).sum();
        s + 1.0 + self.alpha_infinity()
    }

    /// Checks vertex bookkeeping, ordering and the exponent-sum identity.
    pub fn validate(&self) -> Result<(), ScError> {
        let p = &self.polygon;
        let free = p.free_count();
        let mut seen = vec![false; free];
        let mut mark = |k: usize, what: &str| -> Result<(), ScError> {
            if k >= free {
                return Err(ScError::InvalidState(format!(
                    "{what} refers to vertex {k}, which is not a free vertex"
                )));
            }
            if seen[k] {
                return Err(ScError::InvalidState(format!("vertex {k} has two prevertices")));
            }
            seen[k] = true;
            Ok(())
        };
        for f in &self.fixed {
            mark(f.vertex, "fixed prevertex")?;
        }
        for (i, s) in self.slits.iter().enumerate() {
            if let Some(k) = s.vertex {
                mark(k, &format!("slit {i}"))?;
            }
            if !(s.a1 <= s.lambda && s.lambda <= s.a2) {
                return Err(ScError::InvalidState(format!(
                    "slit {i} prevertices out of order: {} {} {}",
                    s.a1, s.lambda, s.a2
                )));
            }
            if self.t > 0.0 && !(s.a1 < s.lambda && s.lambda < s.a2) {
                return Err(ScError::InvalidState(format!("slit {i} has coincident prevertices at t > 0")));
            }
            let expect = match s.vertex {
                Some(k) => p.alpha(k) - 2.0,
                None => -1.0,
            };
            if (s.sigma1 + s.sigma2 - expect).abs() > EXPONENT_SUM_TOL {
                return Err(ScError::InvalidState(format!(
                    "slit {i} bank exponents sum to {}, expected {expect}",
                    s.sigma1 + s.sigma2
                )));
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(ScError::InvalidState(format!("vertex {k} has no prevertex")));
        }

        let moving = self.moving();
        if let Some(m) = moving.iter().find(|m| !(m.x < 0.0)) {
            return Err(ScError::InvalidState(format!(
                "prevertex {} at {} is not negative",
                m.role.label(),
                m.x
            )));
        }
        // Boundary order: vertex indices and slit groups appear in increasing order.
        let mut last_vertex: Option<usize> = None;
        for w in moving.windows(2) {
            let strict = !(matches!((w[0].role, w[1].role), (Role::Bank { slit: i, .. } | Role::Tip { slit: i }, Role::Bank { slit: j, .. } | Role::Tip { slit: j }) if i == j));
            if w[0].x > w[1].x || (strict && w[0].x == w[1].x) {
                return Err(ScError::InvalidState(format!(
                    "prevertices {} and {} out of order",
                    w[0].role.label(),
                    w[1].role.label()
                )));
            }
        }
        let mut order_vertex = |k: usize| -> Result<(), ScError> {
            if let Some(prev) = last_vertex {
                if k <= prev {
                    return Err(ScError::InvalidState(format!(
                        "prevertex order does not follow vertex order at vertex {k}"
                    )));
                }
            }
            last_vertex = Some(k);
            Ok(())
        };
        for m in &moving {
            match m.role {
                Role::Fixed { vertex } => order_vertex(vertex)?,
                Role::Tip { slit } => {
                    if let Some(k) = self.slits[slit].vertex {
                        order_vertex(k)?;
                    }
                }
                _ => {}
            }
        }
        let defect = self.exponent_sum_defect();
        if defect.abs() > EXPONENT_SUM_TOL {
            return Err(ScError::InvalidState(format!("exponent sum identity off by {defect:e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perpendicular_slit_has_half_exponents() {
        let (s1, s2) = side_slit_exponents(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)).unwrap();
        assert!((s1 + 0.5).abs() < 1e-15 && (s2 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn oblique_slit_exponents_sum_to_minus_one() {
        let (s1, s2) = side_slit_exponents(Complex64::new(0.0, -1.0), Complex64::new(1.0, 1.0)).unwrap();
        assert!((s1 + s2 + 1.0).abs() < 1e-15);
        // 135 degrees from the side: alpha1 = 1/4, alpha2 = 3/4.
        assert!((s1 + 0.75).abs() < 1e-15 && (s2 + 0.25).abs() < 1e-15);
    }

    #[test]
    fn slit_pointing_outside_is_rejected() {
        assert!(side_slit_exponents(Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn vertex_slit_splits_angle() {
        // Right-angle corner, outgoing side along +x, slit along the bisector.
        let (s1, s2) =
            vertex_slit_exponents(Complex64::new(1.0, 0.0), Complex64::new(1.0, 1.0), 0.5).unwrap();
        assert!((s1 + 0.75).abs() < 1e-15 && (s2 + 0.75).abs() < 1e-15);
    }

    #[test]
    fn identity_state_is_consistent() {
        let s = AccessoryState::identity();
        s.validate().unwrap();
        assert_eq!(s.prevertices().len(), 2);
    }

    #[test]
    fn collapsed_slits_validate() {
        let mut s = AccessoryState::identity();
        let up = Complex64::new(0.0, 1.0);
        s.slits.push(SlitGroup::collapsed(-2.0, -0.5, -0.5, Complex64::new(-2.0, 0.0), up));
        s.slits.push(SlitGroup::collapsed(-1.0, -0.5, -0.5, Complex64::new(-1.0, 0.0), up));
        s.validate().unwrap();
        assert!(s.exponent_sum_defect().abs() < 1e-15);
    }

    #[test]
    fn positive_prevertex_rejected() {
        let mut s = AccessoryState::identity();
        s.slits.push(SlitGroup::collapsed(2.0, -0.5, -0.5, Complex64::new(2.0, 0.0), Complex64::i()));
        assert!(s.validate().is_err());
    }
}
