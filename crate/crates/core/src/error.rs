use thiserror::Error;

/// Crate-wide error type.
///
/// `Config` carries the name of the violated invariant so that rejected
/// configurations are actionable; `Numerical` and `Statistical` carry
/// diagnostics of the failing computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("statistical error: {0}")]
    Statistical(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn statistical(msg: impl Into<String>) -> Self {
        Error::Statistical(msg.into())
    }
}
