use thiserror::Error;

/// Errors surfaced by the library. Most numerical routines are total on their
/// stated domains; errors are reserved for genuine precondition violations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("divergent quantity: {0}")]
    Divergent(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("all paths were divergence-flagged")]
    AllPathsFlagged,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for `Error::InvalidArgument` with formatting.
macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(format!($($arg)*))
    };
}
pub(crate) use invalid;
