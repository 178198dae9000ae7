use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular geometry: {0}")]
    Singularity(String),
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("query {query} outside interpolation range [{min}, {max}]")]
    Extrapolation { query: f64, min: f64, max: f64 },
    #[error("training set of {size} points exceeds the prediction cap of {cap}; select a subset before conditioning")]
    Capacity { size: usize, cap: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
