//! uclab-core: a numerical laboratory for quantitative unique continuation.
//!
//! The crate measures the computable objects behind propagation-of-smallness
//! experiments for gradients of harmonic functions: certified gradient
//! suprema, doubling indices and their monotonicity, triadic cube censuses,
//! Hausdorff content and Riesz capacity of lattice sets, effective critical
//! sets, and the recursive inequality that links them.

pub mod basis;
pub mod content;
pub mod doubling;
pub mod error;
pub mod geom;
pub mod gmt;
pub mod harmonic;
pub mod lattice;
pub mod poly;
pub mod propagation;
pub mod quad;
pub mod supnorm;
pub mod zoo;

pub use error::{Result, UclabError};
pub use geom::{Ball, BoxRegion, Region};
pub use harmonic::{Charge, EstimateMode, HarmonicFunction, NormEstimate, SphericalTerm};
pub use poly::MultiPoly;
