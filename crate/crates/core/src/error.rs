use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined
    /// (pole of a Gamma factor, non-positive learning rate, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input: non-finite entries, dimension mismatches, bad config.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two routes that must agree did not.
    #[error("numerical consistency error: {0}")]
    NumericalConsistency(String),

    /// The requested operation is not available for these arguments.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A theorem hypothesis the caller asked to rely on does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalConsistency(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn check_dim(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Validation(format!(
            "{what}: dimension {got}, expected {expected}"
        )));
    }
    Ok(())
}
