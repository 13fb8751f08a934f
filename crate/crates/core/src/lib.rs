//! Verification of covering relations, periodic points and topological-entropy
//! lower bounds for coupled map networks with piecewise-affine local dynamics
//! and linear coupling models.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: affine charts, h-sets, unified sets, piecewise-affine maps
//!   and exact stretch computation in the max-norm.
//! - [`degree`]: local Brouwer degree for affine and piecewise-affine maps.
//! - [`covering`]: single covering relations in product form and their
//!   persistence radius.
//! - [`symbolic`]: transition matrices, spectral radius, word counts.
//! - [`network`]: network assembly, structural validation and the two
//!   network-level checkers.
//! - [`dynamics`]: iteration, itineraries, periodic orbits, empirical entropy
//!   and perturbations.
//! - [`cli`]: spec and certificate documents plus the command implementations
//!   behind the `cmn` binary.
//!
//! Indices are zero-based throughout the library and in the numeric fields of
//! certificates. Spec documents, loop words, command output and the entry
//! labels inside certificates are one-based.

pub mod cli;
pub mod covering;
pub mod degree;
pub mod dynamics;
pub mod geometry;
pub mod network;
pub mod report;
pub mod symbolic;

pub use report::{Issue, ValidationReport};
