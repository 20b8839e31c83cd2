use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the search engine and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (largest jitter tried: {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("every hyperparameter candidate failed to factorize")]
    AllCandidatesFailed,

    #[error("outcome set is empty")]
    EmptyOutcomeSet,

    #[error("reference set is empty: no feasible rows")]
    EmptyReference,

    #[error("shortlist is empty")]
    EmptyShortlist,

    #[error("candidate pool is exhausted")]
    Exhausted,

    #[error("pool has {available} candidates, warm start needs {requested}")]
    PoolTooSmall { available: usize, requested: usize },

    #[error("objective {objective} is constant over the pool")]
    DegeneratePool { objective: usize },

    #[error("pool has no ground-truth outcomes")]
    MissingOutcomes,

    #[error("invalid configuration: {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("pool schema error: {0}")]
    Schema(String),

    #[error("duplicate id `{id}` at line {line}")]
    DuplicateId { id: String, line: u64 },

    #[error("non-numeric cell `{value}` at line {line}, column `{column}`")]
    NonNumericCell { line: u64, column: String, value: String },

    #[error("approximation check failed on {} instance(s): {}", .0.len(), .0.join("; "))]
    CheckFailed(Vec<String>),

    #[error("run {policy}/{seed} failed at t={t}: {source}")]
    RunFailed {
        policy: String,
        seed: u64,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} run(s) failed; see {}", manifest.display())]
    BenchFailed { failed: usize, manifest: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}
