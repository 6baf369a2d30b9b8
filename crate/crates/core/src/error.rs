use thiserror::Error;

/// Errors produced anywhere in the simulation, optimization and experiment code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value {value} for {what} at tick {tick}")]
    NonFinite { what: &'static str, tick: u64, value: f64 },

    #[error("layered regime violated: advanced warning {warning} must exceed planning delay {planning_delay}")]
    Regime { warning: f64, planning_delay: f64 },

    #[error("optimizer did not converge; best so far T_s={best_arg}, value={best_value}")]
    NonConvergence { best_arg: f64, best_value: f64 },

    #[error("exhaustive search needs {required} leaf evaluations, budget is {budget}")]
    Budget { required: f64, budget: f64 },

    #[error("records are not comparable: {0}")]
    Mismatch(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_finite(what: &'static str, tick: u64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, tick, value })
    }
}
