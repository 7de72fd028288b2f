use std::path::PathBuf;

use chrono::NaiveDate;
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

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("duplicate profile id `{0}`")]
    DuplicateId(String),

    #[error("profile `{id}`: {reason}")]
    InvalidProfile { id: String, reason: String },

    #[error("readings span more than one year: expected {expected}, found {found}")]
    YearMismatch { expected: i32, found: i32 },

    #[error("timestamp {0} is not aligned to a quarter-hour")]
    UnalignedTimestamp(String),

    #[error("weather series has {found} hourly values, expected {expected}{}",
        .first_missing.map(|d| format!(" (first gap on {d})")).unwrap_or_default())]
    WeatherLength {
        expected: usize,
        found: usize,
        first_missing: Option<NaiveDate>,
    },

    #[error("negative irradiation {value} kW/m2 at hour index {index}")]
    NegativeIrradiation { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cannot draw {requested} connections from a population of {available}")]
    PopulationTooSmall { requested: usize, available: usize },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("profile `{0}` has no EV label")]
    NotAnEv(String),

    #[error("connection grids differ: {0:?} vs {1:?}")]
    GridMismatch(Vec<usize>, Vec<usize>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("day range {start}..{end} is outside a year of {days} days")]
    DayRange {
        start: usize,
        end: usize,
        days: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
