//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension of an input did not match what the operation expects.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration or request.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed checkpoint / model / config file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A solver failed to produce a usable result.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            context,
            expected,
            got,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand used by operations that take fixed-dimension vectors.
pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::shape(context, expected, got));
    }
    Ok(())
}
