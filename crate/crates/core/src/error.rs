use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: a ladder needs at least 2 levels")]
    InvalidDimension(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("t = {t} ns lies outside the pulse support [0, {duration}] ns")]
    OutsideSupport { t: f64, duration: f64 },

    #[error("invalid ladder system: {}", format_violations(.0))]
    InvalidSystem(Vec<Violation>),

    #[error("integration failure at t = {time} ns: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("unsupported envelope shape `{0}`: only square envelopes are piecewise constant")]
    UnsupportedShape(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
