use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The tail of a sample is too thin for a tail-index estimate.
    #[error("insufficient tail data: {0}")]
    InsufficientTail(String),

    /// A query touched a part of the tree that has not been sampled yet.
    #[error("not materialized: {0}")]
    Unmaterialized(String),

    /// A linear system had no unique solution.
    #[error("singular system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
