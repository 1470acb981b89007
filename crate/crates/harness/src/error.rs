use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] mlz_core::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown law suite {requested:?}; available: {}", available.join(", "))]
    UnknownSuite { requested: String, available: Vec<&'static str> },
    #[error("no acceptance criterion {0}; valid ids are 1..=13")]
    UnknownCriterion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}
