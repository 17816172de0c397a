use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request would exceed a configured memory or enumeration budget.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// A bound formula was evaluated outside its domain (e.g. `t >= 2^n`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed graph file: {0}")]
    Format(String),

    #[error("unknown strategy id `{0}`")]
    UnknownStrategy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
