use thiserror::Error;

use crate::linalg::LinalgError;

/// Errors are split by how the CLI reports them: bad input versus a
/// computation that failed part way.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numerical(msg.into()))
}
