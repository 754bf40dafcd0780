use thiserror::Error;

/// Errors shared across the crate. Construction errors are reported eagerly;
/// numerical routines return `BudgetExceeded` before doing any work if the
/// enumeration would be too large.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("enumeration budget exceeded: {states} weighted states, budget {budget}")]
    BudgetExceeded { states: u128, budget: u64 },

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
