//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, detection, and analysis routines.
///
/// The CLI maps `Config` to exit code 2 and `Numerical` to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration (rejected before any computation).
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure inside an otherwise valid computation.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// I/O failure while reading configs or writing reports.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
