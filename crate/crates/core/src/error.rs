use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("start point lies inside obstacle {id}")]
    StartedInside { id: usize },
    #[error("event cap of {cap} exceeded")]
    EventCap { cap: usize },
    #[error("point count {count} exceeds cap {cap}")]
    TooManyPoints { count: f64, cap: f64 },
    #[error("reach {reach} exceeds configured maximum {max}")]
    ReachCap { reach: f64, max: f64 },
    #[error("time {t} is beyond the stored horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("grid is not uniform")]
    NonUniformGrid,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
