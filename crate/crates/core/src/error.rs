use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown row id {0}")]
    UnknownRow(usize),

    #[error("matrix entry {value} at ({row}, {col}) is not in {{{lo}, {hi}}}")]
    BadEntry {
        row: usize,
        col: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("matrix is all zero")]
    ZeroMatrix,

    #[error("degenerate half: rows {start}..{end} are all zero")]
    DegenerateHalf { start: usize, end: usize },

    #[error("power iteration did not converge after {iters} iterations (relative residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("sequence of length {len} is shorter than k = {k}")]
    ShortSequence { len: usize, k: usize },

    #[error("budget exhausted: {requested} pulls requested with {remaining} remaining of {limit}")]
    BudgetExhausted {
        requested: u64,
        remaining: u64,
        limit: u64,
    },

    #[error("ties at rank {k}: the top-k set is not well defined")]
    BoundaryTie { k: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
