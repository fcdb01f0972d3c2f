use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {len} tokens > limit {limit}")]
    Capacity { len: usize, limit: usize },

    #[error("token id {id} outside vocabulary of size {vocab}")]
    InvalidToken { id: u32, vocab: u32 },

    #[error("EOS at position {position} is not the final token")]
    EosNotFinal { position: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("probability query on a black-box teacher handle")]
    AccessViolation,

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite training state: {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
