//! Crate-wide error type.

use thiserror::Error;

use crate::world::ObjectId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
    #[error("no navigable cell to sample")]
    NoNavigableCell,
    #[error("no path to any destination cell")]
    Unreachable,
    #[error("object {0} has no interactable state")]
    NoInteractableState(ObjectId),
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
    #[error("unknown task: {0}")]
    UnknownTask(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("policy has not been trained")]
    UntrainedPolicy,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("no solvable scene for {0}")]
    NoSolvableScene(String),
    #[error("no episode results to aggregate")]
    EmptyResults,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
