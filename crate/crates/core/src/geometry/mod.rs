//! Charts, h-sets, unified sets, piecewise-affine maps and stretch bounds.
//!
//! Every norm is the max-norm, so unit balls are boxes `[-1, 1]^n` and the
//! boundary of a ball is the union of its `2n` facets.

pub mod chart;
pub mod hset;
pub mod polytope;
pub mod pwa;
pub mod stretch;

use thiserror::Error;

pub use chart::AffineChart;
pub use hset::{unified_validate, CenterScale, HSet, UnifiedSet};
pub use polytope::HalfSpace;
pub use pwa::{AffinePiece, Cell, PiecewiseAffineMap};
pub use stretch::{max_stretch, min_stretch, stretch_bounds, Stretch, StretchBounds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("chart is singular (det = {0:e})")]
    SingularChart(f64),
    #[error("radius {0} is outside (0, 1]")]
    Radius(f64),
    #[error("map has no cells")]
    EmptyMap,
    #[error("invalid breakpoints: {0}")]
    Breakpoints(String),
    #[error("map undefined at {0}")]
    Undefined(String),
    #[error("pieces disagree by {gap:e} at {at:?}")]
    Discontinuous { at: Vec<f64>, gap: f64 },
    #[error("cells {0} and {1} overlap")]
    OverlappingCells(usize, usize),
}
