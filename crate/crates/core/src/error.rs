use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("wrong column count at row {row}: expected {expected}, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite feature at row {row}, column {column}")]
    NonFinite { row: usize, column: String },
    #[error("overlapping activities: [{first_start},{first_end}) and [{second_start},{second_end})")]
    OverlappingActivities {
        first_start: usize,
        first_end: usize,
        second_start: usize,
        second_end: usize,
    },
    #[error("rater {rater} has {found} marks, sequence has {expected} samples")]
    RaterLength {
        rater: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training set contains a single class ({0}); at least two are required")]
    SingleClass(usize),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("infeasible fold plan: {0}")]
    InfeasiblePlan(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by non-finite arithmetic rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
