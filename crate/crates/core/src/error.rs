use thiserror::Error;

/// Errors raised by the chart library.
#[derive(Debug, Error)]
pub enum Error {
    /// The autoregressive polynomial has a root on or inside the unit circle.
    #[error("process is not causal: {0}")]
    Causality(String),

    /// An argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity that must stay positive or finite did not.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The scheme has no implementation for the requested process kind.
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),

    /// A configuration value violates an invariant.
    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    /// A Monte-Carlo estimate could not be formed.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A limit cache or results store could not be read or written.
    #[error("storage error: {0}")]
    Storage(String),

    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Calibration failure, carrying every `(limit, estimated ARL)` pair evaluated.
#[derive(Debug, Clone, Error)]
#[error("calibration failed: {message} (after {} evaluations)", history.len())]
pub struct CalibrationError {
    pub message: String,
    pub history: Vec<(f64, f64)>,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
