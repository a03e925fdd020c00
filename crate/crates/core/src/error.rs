use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument was outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The input data carries no usable signal (all zeros, constant, empty).
    #[error("degenerate source: {0}")]
    Degenerate(String),
    /// A query fell outside the range covered by a computed curve or table.
    #[error("out of range: {0}")]
    Range(String),
    /// A serialized block or file did not match the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
