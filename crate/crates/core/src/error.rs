use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside [{lo}, {hi}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{protocol}: Werner parameter {value} left the map domain [{lo}, {hi}] at level {level}")]
    DomainExit {
        protocol: String,
        level: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{protocol}: success probability is zero at level {level}")]
    ZeroProbability { protocol: String, level: usize },

    #[error("{protocol}: rational map is not finite at w = {at} (vanishing denominator?)")]
    Evaluation { protocol: String, at: f64 },

    #[error("registry parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("registry entry `{entry}`: {reason}")]
    Validation { entry: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid grid: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, lo: f64, hi: f64) -> Self {
        Error::Domain {
            quantity,
            value,
            lo,
            hi,
        }
    }
}
