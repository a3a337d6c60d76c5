use thiserror::Error;

/// Errors raised by the estimators and their supporting algebra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("Cholesky factorization failed at pivot {pivot} (matrix not positive definite)")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("bandwidth {bandwidth} leaves an empty kernel window at tau = {tau}")]
    BandwidthTooSmall { tau: f64, bandwidth: f64 },

    #[error("insufficient sample: need at least {needed} observations, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("singular design at tau = {tau} (condition number estimate {condition:e})")]
    SingularDesign { tau: f64, condition: f64 },

    #[error("process is not stationary at tau = {tau} (spectral radius {radius})")]
    NonStationary { tau: f64, radius: f64 },

    #[error("no feasible bandwidth candidate; the smallest feasible bandwidth is {smallest_feasible}")]
    NoFeasibleBandwidth { smallest_feasible: f64 },

    #[error("no feasible lag order candidate: {0}")]
    NoFeasibleLag(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
