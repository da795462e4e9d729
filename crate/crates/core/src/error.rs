use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("job {job} is already completed")]
    JobCompleted { job: usize },

    #[error("job index {job} out of range (instance has {num_jobs} jobs)")]
    JobOutOfRange { job: usize, num_jobs: usize },

    #[error("schedule is complete")]
    ScheduleComplete,

    #[error("schedule is incomplete: {scheduled} of {total} operations scheduled")]
    ScheduleIncomplete { scheduled: usize, total: usize },

    #[error("instance has {ops} operations, above the enumeration limit of {limit}")]
    TooLarge { ops: usize, limit: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
