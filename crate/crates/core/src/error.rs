use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty subspace: basis has zero columns")]
    EmptySubspace,

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    /// The restricted ratio sup ‖u‖/‖Φu‖ is infinite because the kernel
    /// condition fails.
    #[error("unbounded ratio: kernel condition violated for the given cosupport")]
    UnboundedRatio,

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{0}")]
    Io(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    /// A theorem's hypothesis does not hold for the given instance.
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
}
