use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid bootstrap plan: {0}")]
    InvalidPlan(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config error: {0}")]
    ConfigKey(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("enumeration guard exceeded: {outcomes} outcomes (limit {limit})")]
    EnumerationTooLarge { outcomes: f64, limit: u64 },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by user-supplied configuration rather than runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::ConfigKey(_)
                | Error::InvalidParameter(_)
                | Error::InvalidPlan(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
