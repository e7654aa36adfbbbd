//! Crate-wide error type, aligned with the CLI exit codes.

use std::fmt;

/// Errors surfaced by the library.
///
/// Each variant maps to one process exit code (see [`Error::exit_code`]),
/// so the CLI can report failures without re-classifying them.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid argument, out-of-range parameter, or degenerate input.
    Domain(String),
    /// A requested computation exceeds the configured size cap.
    CapExceeded(String),
    /// An iterative procedure failed to reach its tolerance.
    NonConverged(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn cap(msg: impl Into<String>) -> Self {
        Error::CapExceeded(msg.into())
    }

    pub fn non_converged(msg: impl Into<String>) -> Self {
        Error::NonConverged(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            Error::CapExceeded(_) => 3,
            Error::NonConverged(_) => 4,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::CapExceeded(msg) => write!(f, "cap exceeded: {msg}"),
            Error::NonConverged(msg) => write!(f, "did not converge: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
