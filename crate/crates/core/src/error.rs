use thiserror::Error;

use crate::types::TokenId;

/// Errors raised by the probability primitives and value constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("empty support: every logit is masked")]
    EmptySupport,
    #[error("temperature must be finite and > 0, got {0}")]
    InvalidTemperature(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("smoothing exponent k must be finite and > 0, got {0}")]
    InvalidSmoothing(f64),
    #[error("invalid logit at index {index}: {value}")]
    InvalidLogit { index: usize, value: f64 },
    #[error("invalid probability at index {index}: {value}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("empty vector")]
    Empty,
    #[error("token id {id} out of range for vocabulary of size {n}")]
    TokenOutOfRange { id: TokenId, n: usize },
    #[error("duplicate token string {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("unknown token {0:?}")]
    UnknownToken(String),
}
