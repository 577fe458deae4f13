//! Error taxonomy shared across the crate.
//!
//! Four kinds matter to callers: `Domain` (an input violates a precondition),
//! `Numeric` (a non-finite intermediate, reported with the time index and
//! parameter block that produced it), `Estimation` (an optimizer or EM run
//! could not produce a usable fit), and `Config`/`Data` (bad run files).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DammError {
    #[error("domain error in {place}: {msg}")]
    Domain { place: &'static str, msg: String },

    #[error("numeric failure at t={t} in block `{block}`: {msg}")]
    Numeric { t: usize, block: String, msg: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DammError {
    pub fn domain(place: &'static str, msg: impl Into<String>) -> Self {
        DammError::Domain { place, msg: msg.into() }
    }

    pub fn numeric(t: usize, block: impl Into<String>, msg: impl Into<String>) -> Self {
        DammError::Numeric { t, block: block.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, DammError>;
