use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the forecasting pipeline. Locations in input files are
/// 1-based line numbers (the header is line 1) and column names.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed date {value:?} (expected YYYY-MM-DD)")]
    MalformedDate { line: usize, value: String },

    #[error("line {line}, column {column:?}: non-numeric value {value:?}")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },

    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: usize, date: NaiveDate },

    #[error("line {line}: date {date} is earlier than the previous row")]
    UnorderedDate { line: usize, date: NaiveDate },

    #[error("line {line}, column {column:?}: missing value")]
    MissingValue { line: usize, column: String },

    #[error("line {line}, column {column:?}: gap of {gap} rows exceeds max_gap {max_gap}")]
    GapTooLong {
        line: usize,
        column: String,
        gap: usize,
        max_gap: usize,
    },

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("target column {0:?} not found in header")]
    MissingTargetColumn(String),

    #[error("first header column must be `date`, found {0:?}")]
    MissingDateColumn(String),

    #[error("column name {0:?} is empty or duplicated")]
    BadColumnName(String),

    #[error("panel has no signal columns")]
    NoSignals,

    #[error("panel has no data rows")]
    NoRows,

    #[error("panel shape mismatch: {0}")]
    Shape(String),

    #[error("window of length {len} is too short (need at least {min})")]
    WindowTooShort { len: usize, min: usize },

    #[error("slices disagree on window or side")]
    WindowMismatch,

    #[error("similarity value for ({0}, {1}) is not finite")]
    NonFiniteSimilarity(usize, usize),

    #[error("need at least 2 tree nodes, found {0}")]
    TooFewNodes(usize),

    #[error("signal {0} is not a node of the tree")]
    NodeNotInTree(usize),

    #[error("insufficient history: need row {needed}, evaluation starts at row {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("all signals are degenerate in the window")]
    AllDegenerate,

    #[error("estimation window is empty")]
    EmptyWindow,

    #[error("path has {len} nodes, level {level} needs {needed}")]
    PathTooShort {
        level: usize,
        needed: usize,
        len: usize,
    },

    #[error("mixture components do not share an X axis")]
    AxisMismatch,

    #[error("mixture needs at least one component and one interval per component")]
    EmptyMixture,

    #[error("empty month")]
    EmptyMonth,

    #[error("need at least 3 complete months, found {0}")]
    TooFewMonths(usize),

    #[error("config key {key:?}: {message}")]
    InvalidConfig { key: String, message: String },

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid regime model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error comes from bad user input (as opposed to a failure
    /// while computing on valid input).
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence(_) | Error::Io(_) | Error::AxisMismatch | Error::EmptyMixture
        )
    }

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
