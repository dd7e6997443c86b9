use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("field length {found} does not match grid with {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("internal solver failure: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
