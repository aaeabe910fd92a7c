use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group action: {0}")]
    InvalidAction(String),
    #[error("invalid group sampler: {0}")]
    InvalidSampler(String),
    #[error("group element not in sampler support")]
    NotInSupport,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("time {0} outside the allowed range")]
    InvalidTime(f64),
    #[error("point space does not match kernel: {0}")]
    InvalidSpace(String),
    #[error("all importance weights vanished")]
    DegenerateWeights,
    #[error("element set is not closed under composition")]
    NotAGroup,
    #[error("shape mismatch: {0}")]
    InvalidShape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value encountered: {0}")]
    NumericalDivergence(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
