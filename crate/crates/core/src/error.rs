use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {name} = {value} violates: {rule}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("density has zero total mass")]
    ZeroMass,

    #[error("{solve} solve did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolver {
        solve: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("transport step dt = {dt:.3e} exceeds positivity limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("{field} became negative: min {min:.3e}, max {max:.3e}")]
    Positivity { field: &'static str, min: f64, max: f64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("strict decay condition fails: {0}")]
    NotStrict(String),

    #[error("decay fit needs at least {needed} samples in window, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("decay fit: {0}")]
    Fit(String),

    #[error("{0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}
