use std::path::PathBuf;

use thiserror::Error;

/// A single invariant violation, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("missing audio for {} (system, utterance) pair(s): {}", .0.len(), format_pairs(.0))]
    MissingAudio(Vec<(String, String)>),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("session {0} not found")]
    NotFound(String),

    #[error("session {session}: integrity check failed ({reason})")]
    Integrity { session: String, reason: String },

    #[error("all {0} trials were discarded")]
    NoValidTrials(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(s, u)| format!("({s}, {u})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
