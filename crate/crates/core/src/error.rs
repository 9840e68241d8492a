use thiserror::Error;

/// Errors raised by model construction, likelihood evaluation and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing or invalid. `key` names the offending entry.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A distribution parameter is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not meaningful for this input (e.g. noisifying twice).
    #[error("usage error: {0}")]
    Usage(String),

    /// The model lacks a capability the operation needs (density, finite state space, ...).
    #[error("unsupported model: {0}")]
    Unsupported(String),

    /// Every candidate evaluated by the optimizer produced a collapsed (−∞) objective.
    #[error("estimation failed: {failures} of {evaluations} objective evaluations collapsed")]
    EstimationFailed { evaluations: usize, failures: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
