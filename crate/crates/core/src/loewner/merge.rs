use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LoewnerError, Termination, Trace};
use crate::sc_core::{AccessoryState, PolygonSpec, Role, ScError, ScMap};

/// One prevertex after merging; `members` lists what coalesced into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedPrevertex {
    pub x: f64,
    pub sigma: f64,
    pub members: Vec<Role>,
    /// `max - min` of the member positions.
    pub spread: f64,
}

/// Raised when some gap lies within a factor 10 of the clustering tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeAmbiguity {
    pub gaps: Vec<f64>,
    /// Clustering with every ambiguous gap decided the other way.
    pub alternative: Vec<MergedPrevertex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeResult {
    /// Moving prevertices (everything except 0 and 1), increasing.
    pub prevertices: Vec<MergedPrevertex>,
    pub c: Complex64,
    pub cluster_tol: f64,
    pub warning: Option<MergeAmbiguity>,
    #[serde(skip)]
    source: Option<AccessoryState>,
}

fn cluster(moving: &[(f64, f64, Role)], split: &[bool]) -> Vec<MergedPrevertex> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 0..moving.len() {
        let end_here = k + 1 == moving.len() || split[k];
        if !end_here {
            continue;
        }
        let group = &moving[start..=k];
        let sigma: f64 = group.iter().map(|g| g.1).sum();
        let lo = group[0].0;
        let hi = group[group.len() - 1].0;
        let x = if group.len() == 1 {
            lo
        } else if sigma.abs() > 1e-12 {
            // Exponent-weighted centroid; weights can have mixed signs, so keep it inside the cluster.
            let w: f64 = group.iter().map(|g| g.1 * (g.0 - lo)).sum::<f64>() / sigma;
            (lo + w).clamp(lo, hi)
        } else {
            lo + group.iter().map(|g| g.0 - lo).sum::<f64>() / group.len() as f64
        };
        out.push(MergedPrevertex {
            x,
            sigma,
            members: group.iter().map(|g| g.2).collect(),
            spread: hi - lo,
        });
        start = k + 1;
    }
    out
}

/// Replaces every run of moving prevertices whose consecutive gaps are below
/// `cluster_tol` by a single prevertex with the summed exponent.
pub fn merge_degenerate(state: &AccessoryState, cluster_tol: f64) -> MergeResult {
    merge_with(state, cluster_tol, false)
}

/// Merge of a trace's end state. After a degenerate stop, a collapsed run
/// whose exponents sum to `<= -1` cannot be a finite vertex: it is a pocket
/// being closed off by the slit tips on either side, so adjacent tips join it.
pub fn merge_trace(trace: &Trace, cluster_tol: f64) -> MergeResult {
    let pocket = matches!(trace.termination, Termination::Degenerate { .. });
    merge_with(trace.last(), cluster_tol, pocket)
}

fn merge_with(state: &AccessoryState, cluster_tol: f64, absorb_tips: bool) -> MergeResult {
    let moving: Vec<(f64, f64, Role)> = state.moving().iter().map(|p| (p.x, p.sigma, p.role)).collect();
    let gaps: Vec<f64> = moving.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mut split: Vec<bool> = gaps.iter().map(|&g| g >= cluster_tol).collect();
    let mut joins = Vec::new();
    if absorb_tips {
        let is_tip = |k: usize| matches!(moving[k].2, Role::Tip { .. });
        let mut start = 0;
        for k in 0..moving.len() {
            if k + 1 < moving.len() && !split[k] {
                continue;
            }
            let sigma: f64 = moving[start..=k].iter().map(|g| g.1).sum();
            if k > start && sigma <= -1.0 {
                if start > 0 && is_tip(start - 1) {
                    joins.push(start - 1);
                }
                if k + 1 < moving.len() && is_tip(k + 1) {
                    joins.push(k);
                }
            }
            start = k + 1;
        }
        for &k in &joins {
            split[k] = false;
        }
    }
    let prevertices = cluster(&moving, &split);
    let ambiguous: Vec<usize> = (0..gaps.len())
        // Gaps joined by the pocket rule are not decided by the tolerance.
        .filter(|&k| !joins.contains(&k) && gaps[k] > 0.1 * cluster_tol && gaps[k] < 10.0 * cluster_tol)
        .collect();
    let warning = if ambiguous.is_empty() {
        None
    } else {
        let mut alt = split.clone();
        for &k in &ambiguous {
            alt[k] = !alt[k];
        }
        Some(MergeAmbiguity {
            gaps: ambiguous.iter().map(|&k| gaps[k]).collect(),
            alternative: cluster(&moving, &alt),
        })
    };
    MergeResult {
        prevertices,
        c: state.c,
        cluster_tol,
        warning,
        source: Some(state.clone()),
    }
}

impl MergeResult {
    /// SC map of the limiting polygon.
    pub fn map(&self, origin: Complex64, sigma0: f64, sigma1: f64) -> Result<ScMap, ScError> {
        let mut pv: Vec<(f64, f64)> = self.prevertices.iter().map(|p| (p.x, p.sigma)).collect();
        pv.push((0.0, sigma0));
        pv.push((1.0, sigma1));
        ScMap::new(self.c, origin, &pv)
    }

    /// The limiting polygon as a slit-free state, ready to seed another stage.
    /// Vertex positions are the images of the merged prevertices; vertices whose
    /// image is known exactly (fixed vertices, slit bases) use that value.
    pub fn to_state(&self) -> Result<AccessoryState, LoewnerError> {
        let src = self
            .source
            .as_ref()
            .ok_or_else(|| LoewnerError::Plan("merge result has no source state".into()))?;
        let poly = &src.polygon;
        let map = self.map(poly.origin_vertex(), poly.alpha_origin() - 1.0, poly.alpha_one() - 1.0)?;
        let mut vertices = Vec::with_capacity(self.prevertices.len() + 3);
        let mut alphas = Vec::with_capacity(self.prevertices.len() + 3);
        for p in &self.prevertices {
            if !(p.sigma > -1.0) {
                return Err(LoewnerError::Plan(format!(
                    "merged prevertex at {} has exponent {}; unbounded limits are not supported",
                    p.x, p.sigma
                )));
            }
            let exact = if p.members.len() == 1 {
                src.target_image(p.members[0])
            } else {
                None
            };
            let w = match exact {
                Some(w) => w,
                None => map.map_real(p.x)?,
            };
            vertices.push(Some(w));
            alphas.push(p.sigma + 1.0);
        }
        let n = poly.len();
        for k in n - 3..n {
            vertices.push(poly.vertex(k));
            alphas.push(poly.alpha(k));
        }
        let closure: f64 = alphas.iter().map(|a| a - 1.0).sum();
        if (closure + 2.0).abs() > 1e-12 {
            return Err(LoewnerError::Plan(format!("merged exponents do not close: sum {closure}")));
        }
        let base = vertices.len() - 3;
        let polygon = PolygonSpec::new(vertices, alphas, base)?;
        let xs: Vec<f64> = self.prevertices.iter().map(|p| p.x).collect();
        let mut s = AccessoryState::without_slits(Arc::new(polygon), self.c, &xs)?;
        s.t = 0.0;
        Ok(s)
    }
}
