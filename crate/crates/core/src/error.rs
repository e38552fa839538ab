use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("iteration diverged after {iters} steps (norm {norm:.3e} exceeds {limit:.3e})")]
    Divergence { iters: usize, norm: f64, limit: f64 },

    #[error("packing capacity: reached {achieved} members (log {achieved_log:.4}) but {target_log:.4} was required")]
    Capacity {
        achieved: usize,
        achieved_log: f64,
        target_log: f64,
    },

    #[error("hypothesis set violates {0}")]
    Hypothesis(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("bad matrix file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
