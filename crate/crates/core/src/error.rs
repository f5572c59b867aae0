use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("mode {0} is not part of the basis")]
    MissingMode(String),

    #[error("basis not closed under the requested map: {0}")]
    BasisClosure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
