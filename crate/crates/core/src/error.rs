use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("transition function is not mixing within {max_power} steps")]
    NotMixing { max_power: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("leading eigenvalue is not simple: |lambda_2| / r = {ratio}")]
    NonSimpleLeading { ratio: f64 },

    #[error("entropy boundary test inconclusive at z = {z:?}")]
    AmbiguousBoundary { z: Vec<f64> },

    #[error("degenerate maximum at {z:?} (smallest |eigenvalue| {min_eigenvalue:e})")]
    DegenerateMaximum { z: Vec<f64>, min_eigenvalue: f64 },

    #[error("effective sample size {ess:.1} below the required {required}")]
    LowEss { ess: f64, required: f64 },

    #[error("potential depth {depth} unsupported by {method}")]
    DepthUnsupported { depth: usize, method: &'static str },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
