use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("line {line}: cannot parse `{value}` in column `{column}`")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("no overlapping dates")]
    NoOverlap,

    #[error("no valid pixels for date {0}")]
    NoValidPixels(NaiveDate),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("linear algebra: {0}")]
    Singular(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Fetch(#[from] crate::weather_api::FetchError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input (files, config, arguments) rather
    /// than failures while computing. The CLI maps these to exit code 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::MissingColumn { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::Argument(_)
                | Error::DuplicateDate(_)
                | Error::Config(_)
        )
    }
}
