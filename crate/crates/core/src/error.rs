use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A dataset record could not be parsed. `record` is a 1-based line
    /// number for line formats and a 0-based entry index for JSON formats.
    #[error("{file}: record {record}: {message}", record = .record.map(|r| r.to_string()).unwrap_or_else(|| "-".into()))]
    Malformed {
        file: PathBuf,
        record: Option<usize>,
        message: String,
    },

    #[error("missing image {0}")]
    MissingImage(PathBuf),

    #[error("{path}: image error: {message}")]
    Image { path: PathBuf, message: String },

    #[error("encrypted")]
    Encrypted,

    #[error("invalid PDF: {0}")]
    Pdf(String),

    #[error("unknown segment id {id} on page {page_id}")]
    UnknownSegment { page_id: String, id: u64 },

    #[error("empty selection")]
    EmptySelection,

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("schema is missing labels: {}", .0.join(", "))]
    MissingLabels(Vec<String>),

    #[error("labeler timeout")]
    LabelerTimeout,

    #[error("malformed labeler response: {field}: {message}")]
    LabelerResponse { field: String, message: String },

    #[error("labeler error: {0}")]
    Labeler(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("no entity pairs to evaluate")]
    EmptyEvaluation,

    #[error("projects differ in ids: {}", .missing.join(", "))]
    IdMismatch { missing: Vec<String> },

    #[error("cannot split {pages} pages into {parts} parts")]
    TooFewPages { pages: usize, parts: u64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(file: impl Into<PathBuf>, record: Option<usize>, message: impl Into<String>) -> Self {
        Error::Malformed {
            file: file.into(),
            record,
            message: message.into(),
        }
    }

    /// Errors caused by the environment rather than by the content of the
    /// request.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::MissingImage(_) | Error::LabelerTimeout | Error::Labeler(_)
        )
    }
}
