use thiserror::Error;

/// Errors raised by operator construction, solvers and approximants.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator dimension {dim} exceeds the oracle cap {cap}")]
    OracleCapExceeded { dim: usize, cap: usize },

    #[error("nonpositive eigenvalue {value} at index {index}")]
    NonpositiveEigenvalue { index: usize, value: f64 },

    #[error(
        "conjugate gradients did not reach the requested bound {requested:e} within {iterations} \
         iterations (shift {shift}, achieved {achieved:e})"
    )]
    NotConverged {
        shift: f64,
        iterations: usize,
        requested: f64,
        achieved: f64,
        best: Vec<f64>,
    },

    #[error("shifted solve for term {term} (shift {shift}) failed: {source}")]
    TermSolve {
        term: usize,
        shift: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve failed in segment {segment}, step {step}: {reason}")]
    StepSolve {
        segment: usize,
        step: usize,
        reason: String,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid approximant: {0}")]
    InvalidApproximant(String),

    #[error("scalar evaluation failed at lambda = {lambda}: {reason}")]
    Evaluation { lambda: f64, reason: String },

    #[error("missing certified budget: {0}")]
    MissingBudget(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
