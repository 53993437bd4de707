use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("empty spectrum: no positive singular values to allocate power over")]
    EmptySpectrum,

    #[error("outside the domain of the closed form: {0}")]
    Domain(String),

    #[error("per-element optimization refused: {elements} elements exceeds the cap of {cap}")]
    ElementCapExceeded { elements: usize, cap: usize },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidScenario {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Errors caused by bad input rather than by failed checks.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::InvalidScenario { .. } | Error::InvalidSweep(_)
        )
    }
}
