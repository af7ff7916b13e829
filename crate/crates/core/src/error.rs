use thiserror::Error;

/// Errors produced by the library.
///
/// `AllZeroData` and `VacuousTest` are kept apart from `Domain` so callers
/// (the bench harness, the CLI exit-code mapping) can count or report them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("test undefined on all-zero data: {0}")]
    AllZeroData(String),

    #[error("vacuous test: {0}")]
    VacuousTest(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
