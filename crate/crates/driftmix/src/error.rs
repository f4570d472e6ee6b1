//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriftError {
    /// A structural configuration problem (bad sizes, infeasible constraint sets, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (non-SPD matrix, quadrature non-convergence,
    /// rejection-sampler retry cap, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed input data; `line` is 1-based when known.
    #[error("data error at line {line}: {message}")]
    Data { line: u64, message: String },

    /// Persisted samples do not match their manifest or the referenced dataset.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DriftError>;

impl DriftError {
    /// Exit code the CLI maps this error to: 2 for user/validation errors,
    /// 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriftError::Config(_) | DriftError::Domain(_) | DriftError::Data { .. } => 2,
            _ => 1,
        }
    }
}
