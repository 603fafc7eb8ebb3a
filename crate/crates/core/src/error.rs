use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("radius {s} outside the weight domain [{lo}, {hi}]")]
    Domain { s: f64, lo: f64, hi: f64 },

    #[error("invalid weight at s = {s}: {reason}")]
    InvalidWeight { s: f64, reason: String },

    #[error("invalid annulus: {0}")]
    InvalidAnnulus(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration did not reach accuracy: estimate {estimate:e} > tolerance {tolerance:e} at n = {n}")]
    Accuracy { estimate: f64, tolerance: f64, n: usize },

    #[error("no initial value matches target modulus {target}: {reason}")]
    NoSolution { target: f64, reason: String },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("inadmissible map or profile: {0}")]
    Admissibility(String),

    #[error("descent left the feasible class: {0}")]
    Feasibility(String),

    #[error("degenerate row {row}: {reason}")]
    DegenerateRow { row: usize, reason: String },

    #[error("test map generation failed: {0}")]
    Generation(String),

    #[error("degenerate map: {0}")]
    Degeneracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
