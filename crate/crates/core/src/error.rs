use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error: {field}: {message}")]
    Validation { field: String, message: String },

    #[error("scene generation failed after {budget} attempts: {reason}")]
    Generation { budget: usize, reason: String },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("scene {0} has no achievable grid points")]
    NoAchievablePoints(String),

    #[error("k = {k} out of range for {n} points")]
    KOutOfRange { k: usize, n: usize },

    #[error("empty wcss curve")]
    EmptyCurve,

    #[error("invalid detector config: {0}")]
    Detector(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },

    #[error("backend {endpoint} returned status {status}: {body}")]
    BackendStatus {
        endpoint: String,
        status: u16,
        body: String,
    },

    #[error("backend {endpoint} timed out")]
    Timeout { endpoint: String },

    #[error("backend returned an empty completion")]
    EmptyCompletion,

    #[error("no plan steps found in completion")]
    PlanParse { raw: String },

    #[error("cassette has no recording for request {key}")]
    CassetteMiss { key: String },

    #[error("unknown item {0}")]
    UnknownItem(String),

    #[error("annotator {annotator} already voted on item {item}")]
    DuplicateVote { item: String, annotator: String },

    #[error("item {0} already has three votes")]
    ItemComplete(String),

    #[error("invalid vote: {0}")]
    InvalidVote(String),

    #[error("expected 3 votes, got {0}")]
    VoteCount(usize),

    #[error("vote log corrupted at line {line}: {message}")]
    CorruptLog { line: usize, message: String },

    #[error("{0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
