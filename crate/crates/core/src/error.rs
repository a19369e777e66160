use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the validation stack.
///
/// Variants are coarse on purpose: the CLI maps them onto exit codes
/// (invalid input, bad data, degenerate numerics).
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Data(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("degenerate computation: {0}")]
    Degenerate(String),

    /// A variable-importance filter kept no variables.
    #[error("variable selection kept no variables")]
    EmptySelection,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
