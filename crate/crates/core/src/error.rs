use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is structurally valid but degenerate for this estimator
    /// (e.g. a constant trace has no autocorrelation).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Vector/matrix sizes do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix that must be positive (semi-)definite is not.
    #[error("matrix not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    /// An operation was called with the wrong policy variant.
    #[error("policy misuse: {0}")]
    Policy(String),

    /// A recursion or simulation failed to converge within its cap.
    #[error("no convergence: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
