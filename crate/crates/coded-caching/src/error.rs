use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty slot: request batch is all zero")]
    EmptySlot,

    #[error("empty action space: no valid action under the given constraints")]
    EmptyActionSpace,

    #[error("action space too large to enumerate ({size} actions, cap {cap})")]
    ActionSpaceTooLarge { size: u128, cap: u128 },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("environment must be reset before stepping")]
    NotReset,

    #[error("model hidden: environment is not in white-box mode")]
    ModelHidden,

    #[error("discount factor must satisfy gamma < 1, got {0}")]
    DivergentDiscount(f64),

    #[error("empty history")]
    EmptyHistory,

    #[error("config error: {0}")]
    Config(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
