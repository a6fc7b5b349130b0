use thiserror::Error;

/// Errors raised by the model, estimator, likelihood and harness layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A block violates positive definiteness (`1 - delta > 0` and
    /// `1 + (k - 1) delta > 0`).
    #[error("model invalid in cluster {cluster} (size {size}, delta {delta}): {reason}")]
    ModelInvalid {
        cluster: usize,
        size: usize,
        delta: f64,
        reason: String,
    },

    #[error("eigenvalue budget exceeded in cluster {cluster}: |{value}| > {bound}")]
    BudgetExceeded {
        cluster: usize,
        value: f64,
        bound: f64,
    },

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("log-likelihood paths disagree: direct {direct}, spectral {spectral}")]
    PathDisagreement { direct: f64, spectral: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidInput(msg.into()))
}
