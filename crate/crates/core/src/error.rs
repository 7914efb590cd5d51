use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: parse error: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("mutant {mutant} is stale: expected `{expected}` at byte {offset}")]
    StaleMutant {
        mutant: String,
        offset: usize,
        expected: String,
    },

    #[error("invalid status transition for {mutant}: {from} -> {to}")]
    StatusTransition {
        mutant: String,
        from: String,
        to: String,
    },

    #[error("build profile is invalid: {0}")]
    InvalidProfile(String),

    #[error("failed to restore {path}: {source}")]
    Restore {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no record for the original program at level {0}")]
    MissingOriginal(String),

    #[error("coverage vectors belong to different files: {0} vs {1}")]
    FileMismatch(String, String),

    #[error("invalid arguments: {0}")]
    InvalidArguments(String),

    #[error("no tests to prioritize")]
    EmptyTests,

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("mutation score is undefined: no killed or live mutants")]
    EmptyDenominator,

    #[error("association measure is undefined: {0}")]
    Undefined(&'static str),

    #[error("parameters leave the valid region of the correlated binomial: {0}")]
    NegativeProbability(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("infeasible bench parameters: {0}")]
    InfeasibleBench(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed (artifacts in {path}): {message}")]
    Stage {
        stage: String,
        path: PathBuf,
        message: String,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("executor failure: {0}")]
    Executor(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
