use thiserror::Error;

/// Errors raised by formula construction, arithmetic and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid formula: {0}")]
    InvalidFormula(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("arithmetic overflow in {mode} mode")]
    Overflow { mode: String },

    #[error("rescale factor undefined: kappa = {kappa}")]
    DegenerateKappa { kappa: f64 },

    #[error("plan enumeration needs {needed} plans, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
