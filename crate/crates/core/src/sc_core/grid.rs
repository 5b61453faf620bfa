use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AccessoryState, ScError, ScMap};

/// Cartesian grid in the upper half-plane: lines `x = x_min + k spacing` and
/// `y = y_min + k spacing`, each sampled at `samples` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub spacing: f64,
    pub samples: usize,
    /// Points closer than this to a prevertex are skipped. `None` uses
    /// `1e-6` times the prevertex spread.
    #[serde(default)]
    pub exclusion_radius: Option<f64>,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, spacing: f64, samples: usize) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
            spacing,
            samples,
            exclusion_radius: None,
        }
    }

    fn validate(&self) -> Result<(), ScError> {
        let ok = self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.y_min > 0.0
            && self.spacing > 0.0
            && self.samples >= 2
            && [self.x_min, self.x_max, self.y_min, self.y_max, self.spacing]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ScError::InvalidState(format!("bad grid specification {self:?}")))
        }
    }

    fn levels(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineKind {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPolyline {
    pub kind: LineKind,
    /// The constant coordinate of the source line.
    pub level: f64,
    pub preimages: Vec<Complex64>,
    pub points: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridImage {
    pub polylines: Vec<GridPolyline>,
    /// Source points dropped because they were inside the exclusion radius.
    pub skipped: Vec<Complex64>,
}

/// Images of the grid lines. Each line is mapped incrementally (one short
/// segment integral per sample); lines run in parallel and come back in a
/// fixed order.
pub fn grid_image(state: &AccessoryState, grid: &GridSpec) -> Result<GridImage, ScError> {
    grid_image_with(&ScMap::from_state(state)?, grid)
}

pub fn grid_image_with(map: &ScMap, grid: &GridSpec) -> Result<GridImage, ScError> {
    grid.validate()?;
    let xs: Vec<f64> = map.prevertices().map(|(x, _)| x).collect();
    let spread = xs.last().unwrap() - xs.first().unwrap();
    let radius = grid.exclusion_radius.unwrap_or(1e-6 * spread.max(1.0));

    let mut lines: Vec<(LineKind, f64)> = GridSpec::levels(grid.y_min, grid.y_max, grid.spacing)
        .into_iter()
        .map(|y| (LineKind::Horizontal, y))
        .collect();
    lines.extend(
        GridSpec::levels(grid.x_min, grid.x_max, grid.spacing)
            .into_iter()
            .map(|x| (LineKind::Vertical, x)),
    );

    let n = grid.samples;
    let results: Vec<Result<(GridPolyline, Vec<Complex64>), ScError>> = lines
        .par_iter()
        .map(|&(kind, level)| {
            let source: Vec<Complex64> = (0..n)
                .map(|j| {
                    let s = j as f64 / (n - 1) as f64;
                    match kind {
                        LineKind::Horizontal => Complex64::new(grid.x_min + s * (grid.x_max - grid.x_min), level),
                        LineKind::Vertical => Complex64::new(level, grid.y_min + s * (grid.y_max - grid.y_min)),
                    }
                })
                .collect();
            let mut preimages = Vec::with_capacity(n);
            let mut points = Vec::with_capacity(n);
            let mut skipped = Vec::new();
            let mut last: Option<(Complex64, Complex64)> = None;
            for z in source {
                if xs.iter().any(|&x| (z - x).norm() < radius) {
                    skipped.push(z);
                    continue;
                }
                let w = match last {
                    Some((z0, w0)) => w0 + map.integrate_segment(z0, z)?,
                    None => map.map(z)?,
                };
                last = Some((z, w));
                preimages.push(z);
                points.push(w);
            }
            Ok((
                GridPolyline {
                    kind,
                    level,
                    preimages,
                    points,
                },
                skipped,
            ))
        })
        .collect();

    let mut polylines = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for r in results {
        let (line, sk) = r?;
        polylines.push(line);
        skipped.extend(sk);
    }
    Ok(GridImage { polylines, skipped })
}
