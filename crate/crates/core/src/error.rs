use thiserror::Error;

use crate::krylov::SolveStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field shape mismatch: expected {expected:?}, got {found_len} samples")]
    ShapeMismatch {
        expected: (usize, usize),
        found_len: usize,
    },

    #[error("kernel row has {row_len} entries but history holds {history_len} increments")]
    HistoryLength { row_len: usize, history_len: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear solve failed at step {step}: {stats}")]
    SolveFailed { step: usize, stats: SolveStats },

    #[error("non-finite values detected at step {step}")]
    Divergence { step: usize },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
