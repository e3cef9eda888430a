use thiserror::Error;

use crate::joint::RatePoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Some `(group, outcome)` conditioning event carries zero weight.
    #[error("no weight for group {group} with outcome {outcome}")]
    EmptyGroupOutcome { group: usize, outcome: u8 },

    #[error("negative sample weight {0}")]
    NegativeWeight(f64),

    #[error("non-finite score {0}")]
    NonFiniteScore(f64),

    #[error("target ({:.6}, {:.6}) lies outside the achievable region", .0.fpr, .0.tpr)]
    Infeasible(RatePoint),

    #[error("loss has zero cost for both error types")]
    DegenerateLoss,

    #[error("unknown group {0}")]
    UnknownGroup(usize),

    #[error("distributions have different group/outcome structure")]
    StructureMismatch,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
