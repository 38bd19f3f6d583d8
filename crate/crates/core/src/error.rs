use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid corridor geometry: {0}")]
    Geometry(String),
    #[error("invalid sample: count {count} with zero occupancy")]
    InvalidSample { count: f64 },
    #[error("g-factor calibration failed: {0}")]
    Calibration(String),
    #[error("invalid value for `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("CFL condition violated: free-flow speed {v_ff} mph moves {reach:.4} mi per step, cell is {dx} mi")]
    Cfl { v_ff: f64, reach: f64, dx: f64 },
    #[error("{path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
