use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series did not converge within {terms} terms")]
    NonConvergence { terms: usize },

    #[error("precipitation strength must be non-negative, got {0}")]
    NegativeGamma(f64),

    #[error("threshold u* = {u_star} is not below the critical value u*_0 = {u_star_zero}")]
    NotSupercritical { u_star: f64, u_star_zero: f64 },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("singular pivot {pivot:e} at row {row}")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("{what} = {value} is outside the recorded range [0, {limit}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

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
}

pub type Result<T> = std::result::Result<T, Error>;

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
}
