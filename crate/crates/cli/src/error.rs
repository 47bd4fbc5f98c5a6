use std::process::ExitCode;

use thiserror::Error;
use varchart::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {field}: {message}")]
    Validation { field: String, message: String },

    #[error("{0}")]
    Calibration(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation { .. } => 2,
            CliError::Calibration(_) => 3,
            CliError::Estimation(_) => 4,
            CliError::Io(_) => 1,
        })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig { field, message } => CliError::Validation { field, message },
            CoreError::Causality(m) => CliError::field("process.phi", m),
            CoreError::Domain(m) => CliError::field("value", m),
            CoreError::UnsupportedScheme(m) => CliError::field("chart.scheme", m),
            CoreError::Calibration(c) => {
                let mut msg = c.to_string();
                for (limit, arl) in &c.history {
                    msg.push_str(&format!("\n  c = {limit}: ARL {arl}"));
                }
                CliError::Calibration(msg)
            }
            CoreError::Storage(m) => CliError::Io(m),
            CoreError::Numerical(m) | CoreError::Estimation(m) => CliError::Estimation(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
