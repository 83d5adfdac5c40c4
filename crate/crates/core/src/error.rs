use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation.
    #[error("invalid configuration: `{field}` {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A function argument lies outside its domain.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("bandwidth undefined: {0}")]
    Bandwidth(String),

    #[error("series has {len} records, shorter than the averaging window of {window}")]
    WindowTooLong { len: usize, window: usize },

    #[error("quadrature did not converge on [{lower}, {upper}]: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("failed to parse {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("simulation run panicked: {0}")]
    RunPanicked(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by the user-supplied configuration rather than
    /// by the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. } | Error::InvalidParameter { .. } | Error::ConfigParse { .. }
        )
    }
}
