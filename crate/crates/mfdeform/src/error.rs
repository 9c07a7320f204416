use thiserror::Error;

/// Errors raised by the library. Verification outcomes are reported through
/// report structs, not through this type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("ground ring mismatch: {0} vs {1}")]
    RingMismatch(String, String),
    #[error("variable count mismatch: {0} vs {1}")]
    NvarsMismatch(usize, usize),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("arity cap exceeded: need {needed}, cap {cap}")]
    ArityCap { needed: usize, cap: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("{0}: {1}")]
    Stage(String, Box<Error>),
}

pub type Result<T> = std::result::Result<T, Error>;
