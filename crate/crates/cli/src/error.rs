use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("expected two groups after filtering, found {}: {}", .0.len(), .0.join(", "))]
    MoreThanTwoGroups(Vec<String>),

    #[error("expected two groups after filtering, found {}", .0.len())]
    TooFewGroups(Vec<String>),

    #[error("group `{0}` does not occur in the data")]
    UnknownGroup(String),

    #[error("invalid scenario file: {0}")]
    Scenario(String),

    #[error(transparent)]
    Core(#[from] cifeq_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
