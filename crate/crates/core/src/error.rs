//! Error type shared across the crate.

use thiserror::Error;

/// Unified error for I/O, format, validation, and numerical failures.
///
/// The CLI maps `Io`, `Format`, `InvalidInput`, and `DimensionMismatch` to a
/// configuration/usage exit code and `Numerical` to a numerical-failure exit
/// code, so fit routines must take care to classify failures correctly:
/// a singular Gram matrix is `Numerical`, a negative ridge weight is
/// `InvalidInput`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk artifact: bad magic, truncated payload, size
    /// overflow, unparseable JSON.
    #[error("format error: {0}")]
    Format(String),

    /// A precondition on caller-supplied values was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operands exist but their shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A well-posed computation failed numerically (singular or severely
    /// ill-conditioned system, factorization breakdown).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the mathematics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(format!("json: {e}"))
    }
}
