use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants split into two families that the command-line driver maps to
/// distinct exit codes: bad input ([`Error::Validation`], [`Error::Config`],
/// [`Error::Domain`]) and numerical failure ([`Error::Solver`],
/// [`Error::Integration`], [`Error::Oracle`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation outside the domain: {0}")]
    Domain(String),

    #[error("root solver failed on interval {interval}: {reason}")]
    Solver { interval: usize, reason: String },

    #[error("integration did not converge: estimate {estimate:e}, error bound {error:e} after {subdivisions} subdivisions")]
    Integration {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("finite-difference oracle failed: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True when the error stems from user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Config(_) | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
