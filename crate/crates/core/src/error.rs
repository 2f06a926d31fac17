use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid permutation sequence: {0}")]
    InvalidSequence(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumerating all groups for m_o = {m_o} exceeds the cap of m_o <= {cap}")]
    EnumerationCap { m_o: usize, cap: usize },

    #[error("m_o = {0} is not prime; the congruence construction needs a prime segment count")]
    NotPrime(usize),

    #[error("extension rate out of range: {0}")]
    AlphaOutOfRange(String),

    #[error("signal length n = {n} is not a multiple of m_o = {m_o}")]
    Divisibility { n: usize, m_o: usize },

    #[error("duplicate extension sequence {0}")]
    DuplicateSequence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular least-squares system on a support of size {0}")]
    SingularLeastSquares(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
