use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("quadrature construction failed: {0}")]
    Quadrature(String),
    #[error("spectral cutoff exceeded: degree {degree} > L = {cutoff}")]
    Cutoff { degree: usize, cutoff: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid profile: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
