use thiserror::Error;

/// Errors raised by model construction and the learners.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("generating function is defined on the positive orthant, got x[{index}] = {value}")]
    Domain { index: usize, value: f64 },

    #[error("reward {value} at arm {arm} exceeds the bound K = {bound}")]
    RewardBound { arm: usize, value: f64, bound: f64 },

    #[error("loss-only setting requires observations in [-1, 0], got {value} at arm {arm}")]
    LossOutOfRange { arm: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid variant: {0}")]
    InvalidVariant(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("observe called before a decision was taken")]
    NoDecision,

    #[error("failed to parse {what}: {msg}")]
    Parse { what: &'static str, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
