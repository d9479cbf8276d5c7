use thiserror::Error;

/// Errors produced by the solver, the filter and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("point {0:?} lies outside the domain")]
    Domain(Vec<f64>),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("solution diverged at t = {t}, dt = {dt:e}")]
    Divergence { t: f64, dt: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
