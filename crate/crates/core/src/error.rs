use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, designers and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bit width {0}: must be in 1..=64")]
    InvalidWidth(u32),

    #[error("width mismatch: expected {expected} bits, found {found}")]
    WidthMismatch { expected: u32, found: u32 },

    /// An operation was called outside its contract (e.g. narrowing via a
    /// widening operation).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid user-supplied parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A filter designer could not meet its target.
    #[error("design error: {0}")]
    Design(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
