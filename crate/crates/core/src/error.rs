use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("query at t={t} is at or after the explosion time {explosion}")]
    QueryAfterExplosion { t: f64, explosion: f64 },
    #[error("query at t={t} is beyond the horizon {horizon}")]
    QueryBeyondHorizon { t: f64, horizon: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("integrability error: {0}")]
    IntegrabilityError(String),
    #[error("jump {size} at t={time} is below -1")]
    JumpBelowMinusOne { time: f64, size: f64 },
    #[error("process is negative at t={time}")]
    NotNonnegative { time: f64 },
    #[error("process leaves zero at t={time}")]
    RevivesAfterZero { time: f64 },
    #[error("compensator integral diverges at t={time}")]
    CompensatorDiverges { time: f64, positive: bool },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown example {0:?}")]
    UnknownExample(String),
    #[error("no analytic oracle: {0}")]
    OracleUnavailable(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("config error in {field}: {message}")]
    ConfigError { field: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
