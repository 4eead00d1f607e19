use thiserror::Error;

/// Errors raised by the numerical kernels, models and optimizers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("series for f_M did not converge within {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error("self-consistent loop did not converge in {iterations} iterations (eps_iter = {eps_iter:e})")]
    MaxIterExceeded { iterations: usize, eps_iter: f64 },

    #[error(
        "joint field/state loop diverged in interval {interval} after {iterations} iterations \
         (state residual {state_residual:e}, field residual {field_residual:e})"
    )]
    JointLoopDiverged {
        interval: usize,
        iterations: usize,
        state_residual: f64,
        field_residual: f64,
    },

    #[error("matrix is rank deficient (smallest singular value {smallest:e})")]
    RankDeficient { smallest: f64 },

    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("state count mismatch: expected {expected}, got {got}")]
    StateCount { expected: usize, got: usize },

    #[error("state norm deviates from one by {deviation:e}")]
    NotNormalized { deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
