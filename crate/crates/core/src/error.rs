use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Error)]
pub enum NrmError {
    #[error("invalid instance: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("grid of {cells} cells exceeds the exact-DP cap of {cap}; use Monte-Carlo simulation instead")]
    CapExceeded { cells: u128, cap: u64 },

    #[error("LP not solved to optimality (status {0})")]
    NotOptimal(LpStatus),

    #[error("assortment family has {size} members, above the cap of {cap}")]
    FamilyTooLarge { size: usize, cap: usize },

    #[error("state {state} at period {period} has no customer type; no decision exists")]
    NullState { period: usize, state: usize },

    #[error("policy bug: {0}")]
    InfeasibleAction(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("instance is not in high-variance form: {0}")]
    NotHighVariance(String),

    #[error("solver backend: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, NrmError>;
