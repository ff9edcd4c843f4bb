use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, its diagnostics and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value {value} at cell {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("incompatible right-hand side: integral {integral:e} is not zero for the pure Neumann problem")]
    IncompatibleRhs { integral: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the iterative linear solvers.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::NonFinite { .. })
    }
}
