use thiserror::Error;

use rsg_core::GameError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Game(#[from] GameError),

    #[error("configuration: {0}")]
    Config(String),

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("{excluded} of {total} instances failed, above the 5% cap")]
    TooManyExclusions { excluded: usize, total: usize },

    #[error("output schema {found:?} does not match {expected:?}")]
    SchemaMismatch { expected: String, found: String },

    #[error("stored record {0} is inconsistent")]
    CorruptRecord(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
