use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input (lengths, ranges, parse failures).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The data carry no variation where the statistic needs some.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A symmetric positive-definite factorization did not succeed.
    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("interpolation infeasible: kernel matrix is rank deficient and lambda is 0")]
    InterpolationInfeasible,

    #[error("exact enumeration supports n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    /// More replications failed than a scenario tolerates.
    #[error("{failures} of {replications} replications failed (first error: {first})")]
    TooManyFailures {
        failures: usize,
        replications: usize,
        first: String,
    },

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

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the linear algebra rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization(_) | Error::InterpolationInfeasible)
    }
}
