use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{Finding, ModelError};
use crate::params::ParamError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid problem: {}", join(.0))]
    Invalid(Vec<Finding>),
    #[error("iteration {iteration}: {source}")]
    Numerical { iteration: usize, source: LinalgError },
    #[error("state shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in iterate")]
    NonFinite,
}

impl From<LinalgError> for SolveError {
    fn from(source: LinalgError) -> Self {
        SolveError::Numerical { iteration: 0, source }
    }
}

impl SolveError {
    pub(crate) fn at(self, iteration: usize) -> Self {
        match self {
            SolveError::Numerical { source, .. } => SolveError::Numerical { iteration, source },
            other => other,
        }
    }
}

fn join(f: &[Finding]) -> String {
    f.iter().map(|f| f.message.as_str()).collect::<Vec<_>>().join("; ")
}
