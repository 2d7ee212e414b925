//! Error type shared by the library's operations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum UclabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation at or too close to a point charge at {location:?}")]
    ChargeEvaluation { location: Vec<f64> },

    #[error("region leaves the harmonicity domain: {reason}")]
    DomainViolation { reason: String },

    #[error("certified gradient supremum {value:e} is indistinguishable from zero")]
    VanishingGradient { value: f64 },

    #[error(
        "refinement did not converge: relative error {achieved:e} after {steps} steps (budget {budget})"
    )]
    NonConvergence {
        achieved: f64,
        steps: usize,
        budget: usize,
    },

    #[error("lattice resolutions are incommensurate: {0}")]
    IncommensurateResolution(String),

    #[error("branching factor {0} is not a power of 3 (>= 3)")]
    InvalidBranching(u32),

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("energy diverges: exponent s = {s} with {reason}")]
    EnergyDivergence { s: f64, reason: String },

    #[error("coincident atoms remain after merge at tolerance {tolerance:e}")]
    CoincidentAtoms { tolerance: f64 },

    #[error("requested dimension {target} is unreachable: {reason}")]
    UnreachableDimension { target: f64, reason: String },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("not harmonic: Laplacian residual coefficient {coeff:e} on monomial {monomial:?}")]
    NotHarmonic { coeff: f64, monomial: Vec<u32> },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("fit requires at least {required} instances, got {got}")]
    FamilyTooSmall { required: usize, got: usize },

    #[error("no positive root: {0}")]
    NoPositiveRoot(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UclabError>;
