use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("constraint pair {index} is degenerate (o_i and s_i both ~0)")]
    DegeneratePair { index: usize },
    #[error("point is infeasible: max |h_i| = {max_violation:e} exceeds {tolerance:e}")]
    Infeasible { max_violation: f64, tolerance: f64 },
    #[error("non-finite value at step {step} ({context})")]
    NonFinite { step: usize, context: &'static str },
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
    #[error("degenerate equilibrium: eigenvalue {eigenvalue:e} within {threshold:e} of zero")]
    DegenerateEquilibrium { eigenvalue: f64, threshold: f64 },
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("simulation diverged (|y| = {magnitude:e}) for seed {seed}")]
    Divergent { seed: u64, magnitude: f64 },
    #[error("schema mismatch in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            what,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
