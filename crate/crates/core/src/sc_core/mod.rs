//! Polygons, slit bookkeeping, the evolving accessory-parameter state, and
//! evaluation of the Schwarz-Christoffel map
//! `f(z) = A_{n-2} + c ∫_0^z prod_l (ζ - λ_l) prod_{ij} (ζ - a_ij)^σ_ij prod_k (ζ - a_k)^σ_k dζ`
//! with `a_{n-2} = 0`, `a_{n-1} = 1`, `a_n = ∞`.

mod grid;
mod map;
mod polygon;
mod state;

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::QuadratureError;

pub use grid::{grid_image, grid_image_with, GridImage, GridPolyline, GridSpec, LineKind};
pub use map::{
    locate_prevertex, locate_with, log_down, sc_derivative, sc_map, sc_map_with, slit_endpoint, slit_length, ScMap,
    TOL_MAP,
};
pub use polygon::{PolygonSpec, CLOSURE_TOL};
pub use state::{
    side_slit_exponents, vertex_slit_exponents, AccessoryState, FixedPrevertex, Prevertex, Role, SlitGroup,
    EXPONENT_SUM_TOL,
};

#[derive(Debug, Clone, Error)]
pub enum ScError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("{z} is the prevertex {x}")]
    SingularPoint { z: Complex64, x: f64 },
    #[error("{0} is outside the closed upper half-plane")]
    OutsideDomain(Complex64),
    #[error("integration from {from} to {to} failed")]
    Integration {
        from: Complex64,
        to: Complex64,
        #[source]
        source: QuadratureError,
    },
    #[error("no preimage of {target} in [{lo}, {hi}]: {reason}")]
    RootNotFound {
        target: Complex64,
        lo: f64,
        hi: f64,
        reason: String,
    },
    #[error("slit index {index} out of range ({count} slits)")]
    SlitIndex { index: usize, count: usize },
}
