use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The RIS budget left for the transmit-dependent term is negative.
    #[error("infeasible RIS budget: P_a - |psi|^2 sigma1^2 = {residual_budget:e} < 0")]
    InfeasibleRisBudget { residual_budget: f64 },

    #[error("rank-one recovery failed: {diagnostics}")]
    RankOneRecovery { diagnostics: String },

    #[error("SDP solver: {0}")]
    Solver(String),

    #[error("optimizer aborted at outer iteration {iteration}: {reason}")]
    OptimizerAborted { iteration: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
