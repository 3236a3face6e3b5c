use thiserror::Error;

use crate::precoding::Scheme;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{scheme}: Gram matrix is numerically singular (condition number {condition:.3e})")]
    Singular { scheme: Scheme, condition: f64 },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("quadrature did not converge within {evaluations} evaluations (partial estimate {estimate})")]
    NoConvergence { estimate: f64, evaluations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True when this error (or the error it wraps) is a singular Gram matrix.
    pub fn is_singular(&self) -> bool {
        match self {
            Error::Singular { .. } => true,
            Error::Trial { source, .. } => source.is_singular(),
            _ => false,
        }
    }
}
