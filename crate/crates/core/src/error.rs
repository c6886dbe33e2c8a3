use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group specification: {0}")]
    InvalidSpec(String),

    #[error("element does not belong to this free product: {0}")]
    SpecMismatch(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("not enough data: {0}")]
    TooFewTerms(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("walk is not radial: {0}")]
    NotRadial(String),

    #[error("sphere sums do not decay: {0}")]
    NonConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
