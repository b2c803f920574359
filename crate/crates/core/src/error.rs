use thiserror::Error;

use crate::backfit::FitDiagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A covariate or response value is unusable; `row` is zero-based.
    #[error("data error in row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("identifiability error: {0}")]
    Identifiability(String),

    #[error("backfitting did not converge after {} sweeps", .diagnostics.sweeps)]
    Convergence { diagnostics: Box<FitDiagnostics> },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("monte carlo harness error: {0}")]
    Harness(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn identifiability(msg: impl Into<String>) -> Self {
        Error::Identifiability(msg.into())
    }
}
