//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A series is too short for the requested lag window.
    #[error("insufficient data: series `{id}` has T={t} but p_max={p_max} requires T > p_max + 1")]
    InsufficientData { id: String, t: usize, p_max: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// Covariance matrix is not positive definite (Cholesky failed).
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("numeric failure at series {series}, component {component}: {detail}")]
    NumericFailure {
        series: usize,
        component: usize,
        detail: String,
    },

    #[error("degenerate cluster {component}: {detail}")]
    DegenerateCluster { component: usize, detail: String },

    #[error("initialization failed: {0}")]
    InitFailure(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("simulation failed: {0}")]
    SimulationFailure(String),

    #[error("value out of range: {0}")]
    RangeError(String),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
