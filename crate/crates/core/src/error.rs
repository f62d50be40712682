use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid date `{0}`")]
    InvalidDate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("series is empty")]
    EmptySeries,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}: row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("no market data for jurisdiction `{0}`")]
    MissingJurisdiction(String),

    #[error("numerical degeneracy at t={t}: {message}")]
    Degenerate { t: usize, message: String },

    #[error("series too short: {present} present observations, need at least {required}")]
    TooShort { present: usize, required: usize },

    #[error("cutoff {cutoff} precedes the first observation ({first})")]
    NoDataBeforeCutoff { cutoff: String, first: String },

    #[error("non-finite value in MCMC at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("insufficient draws: have {have}, need {need}")]
    InsufficientDraws { have: usize, need: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }

    /// Whether the error stems from user input (files, configuration, data)
    /// rather than a failure inside the numerical machinery.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Degenerate { .. } | Error::NonFinite { .. })
    }

    /// Whether the data simply do not reach far enough for a fit, as opposed
    /// to being malformed.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(self, Error::TooShort { .. } | Error::NoDataBeforeCutoff { .. } | Error::EmptySeries)
    }
}
