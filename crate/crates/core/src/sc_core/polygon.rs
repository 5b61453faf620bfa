use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScError;

/// Closure tolerance for `sum (alpha_k - 1) = -2`.
pub const CLOSURE_TOL: f64 = 1e-12;

/// A polygon described by its vertices in boundary order (domain on the left)
/// and interior-angle multipliers `alpha_k` (interior angle `pi alpha_k`).
///
/// Internally the vertex list is rotated so that the last three vertices are
/// the images of the prevertices `0`, `1` and `infinity`. A vertex of `None`
/// lies at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolygon", into = "RawPolygon")]
pub struct PolygonSpec {
    vertices: Vec<Option<Complex64>>,
    alphas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPolygon {
    vertices: Vec<Option<Complex64>>,
    alphas: Vec<f64>,
    #[serde(default)]
    base_vertex_index: Option<usize>,
}

impl TryFrom<RawPolygon> for PolygonSpec {
    type Error = ScError;

    fn try_from(raw: RawPolygon) -> Result<Self, ScError> {
        let n = raw.vertices.len();
        let base = raw.base_vertex_index.unwrap_or(n.saturating_sub(3));
        PolygonSpec::new(raw.vertices, raw.alphas, base)
    }
}

impl From<PolygonSpec> for RawPolygon {
    fn from(p: PolygonSpec) -> Self {
        let base = p.base_vertex_index();
        RawPolygon {
            vertices: p.vertices,
            alphas: p.alphas,
            base_vertex_index: Some(base),
        }
    }
}

impl PolygonSpec {
    /// `base_vertex_index` names the vertex that is the image of prevertex 0;
    /// the next two vertices (cyclically) are the images of 1 and infinity.
    pub fn new(
        vertices: Vec<Option<Complex64>>,
        alphas: Vec<f64>,
        base_vertex_index: usize,
    ) -> Result<Self, ScError> {
        let n = vertices.len();
        if n < 3 {
            return Err(ScError::InvalidPolygon(format!("need at least 3 vertices, got {n}")));
        }
        if alphas.len() != n {
            return Err(ScError::InvalidPolygon(format!(
                "{} vertices but {} angle multipliers",
                n,
                alphas.len()
            )));
        }
        if base_vertex_index >= n {
            return Err(ScError::InvalidPolygon(format!(
                "base vertex index {base_vertex_index} out of range"
            )));
        }
        if let Some(k) = alphas.iter().position(|a| !a.is_finite() || a.abs() > 2.0) {
            return Err(ScError::InvalidPolygon(format!(
                "angle multiplier alpha[{k}] = {} outside [-2, 2]",
                alphas[k]
            )));
        }
        if let Some(k) = vertices
            .iter()
            .position(|v| v.is_some_and(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(ScError::InvalidPolygon(format!("vertex {k} is not a finite number")));
        }
        let closure: f64 = alphas.iter().map(|a| a - 1.0).sum();
        if (closure + 2.0).abs() > CLOSURE_TOL {
            return Err(ScError::InvalidPolygon(format!(
                "sum of (alpha - 1) is {closure}, expected -2"
            )));
        }
        // Rotate so the base vertex sits at n - 3.
        let shift = (base_vertex_index + 3) % n;
        let mut vs = vertices;
        let mut al = alphas;
        vs.rotate_left(shift);
        al.rotate_left(shift);
        if vs[n - 3].is_none() || vs[n - 2].is_none() {
            return Err(ScError::InvalidPolygon(
                "the images of prevertices 0 and 1 must be finite".into(),
            ));
        }
        Ok(Self {
            vertices: vs,
            alphas: al,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Option<Complex64>] {
        &self.vertices
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Always `n - 3` after normalization.
    pub fn base_vertex_index(&self) -> usize {
        self.vertices.len() - 3
    }

    pub fn vertex(&self, k: usize) -> Option<Complex64> {
        self.vertices[k]
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k]
    }

    /// Image of prevertex 0.
    pub fn origin_vertex(&self) -> Complex64 {
        self.vertices[self.len() - 3].expect("validated finite")
    }

    /// Image of prevertex 1.
    pub fn one_vertex(&self) -> Complex64 {
        self.vertices[self.len() - 2].expect("validated finite")
    }

    pub fn alpha_origin(&self) -> f64 {
        self.alphas[self.len() - 3]
    }

    pub fn alpha_one(&self) -> f64 {
        self.alphas[self.len() - 2]
    }

    /// Angle multiplier of the vertex at the image of infinity.
    pub fn alpha_infinity(&self) -> f64 {
        self.alphas[self.len() - 1]
    }

    /// Number of vertices whose prevertices are free (everything except the
    /// images of 0, 1 and infinity).
    pub fn free_count(&self) -> usize {
        self.len() - 3
    }

    /// Finite vertices as a closed polyline, or `None` if any vertex is infinite.
    pub fn finite_outline(&self) -> Option<Vec<Complex64>> {
        self.vertices.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Option<Complex64> {
        Some(Complex64::new(re, im))
    }

    #[test]
    fn rotates_base_vertex_to_slot() {
        let p = PolygonSpec::new(
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)],
            vec![0.5; 4],
            0,
        )
        .unwrap();
        assert_eq!(p.origin_vertex(), Complex64::new(0.0, 0.0));
        assert_eq!(p.one_vertex(), Complex64::new(1.0, 0.0));
        assert_eq!(p.vertex(0), c(0.0, 1.0));
    }

    #[test]
    fn rejects_open_boundary() {
        let err = PolygonSpec::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)], vec![0.5; 3], 0);
        assert!(matches!(err, Err(ScError::InvalidPolygon(_))));
    }

    #[test]
    fn half_plane_with_infinite_vertex() {
        let p = PolygonSpec::new(vec![c(0.0, 0.0), c(1.0, 0.0), None], vec![1.0, 1.0, -1.0], 0).unwrap();
        assert_eq!(p.alpha_infinity(), -1.0);
        assert!(p.finite_outline().is_none());
    }

    #[test]
    fn rejects_infinite_origin_image() {
        assert!(PolygonSpec::new(vec![None, c(1.0, 0.0), c(0.0, 0.0)], vec![-1.0, 1.0, 1.0], 0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = PolygonSpec::new(vec![c(0.0, 0.0), c(1.0, 0.0), None], vec![1.0, 1.0, -1.0], 0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: PolygonSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
