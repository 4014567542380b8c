use thiserror::Error;

use crate::generation::ModelError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sentence pair: {0}")]
    InvalidPair(String),

    #[error("invalid example: {0}")]
    InvalidExample(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid challenge item: {0}")]
    InvalidChallenge(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("subtitle lines out of order in show {show_id:?}: {prev} s then {next} s")]
    Unsorted {
        show_id: String,
        prev: f64,
        next: f64,
    },

    #[error("invalid subtitle line: {0}")]
    InvalidSubtitle(String),

    #[error("random pool is empty")]
    EmptyPool,

    #[error("could not draw a pool pair distinct from the current pair after {0} retries")]
    PoolExhausted(usize),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: {hyps} hypotheses vs {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },

    #[error("missing challenge set {0:?}")]
    MissingSet(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
