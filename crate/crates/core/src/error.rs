use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("node {node} out of range (n = {n})")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tape is stale: recorded at parameter version {tape}, network is at {current}")]
    StaleTape { tape: u64, current: u64 },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("all-pairs dataset of {pairs} pairs exceeds the budget of {budget} pairs")]
    AllPairsBudget { pairs: u64, budget: u64 },

    #[error("workload augmentation reached only {achieved} of {target} unique pairs")]
    WorkloadTarget { achieved: usize, target: usize },

    #[error("unknown model `{name}`; known models: {known}")]
    UnknownModel { name: String, known: String },

    #[error("model `{0}` has learnable parameters but has not been trained")]
    Untrained(String),

    #[error("nodes {u} and {v} are disconnected")]
    Disconnected { u: usize, v: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
