use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("epsilon must lie in [0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("unknown environment '{0}'")]
    UnknownEnv(String),

    #[error("state {0} is terminal and cannot be stepped")]
    TerminalState(usize),

    #[error("{kind} {index} out of range (limit {limit})")]
    OutOfRange {
        kind: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("step() called before reset()")]
    NotReset,

    #[error("(state {state}, action {action}) was never observed in the dataset")]
    UnknownPair { state: usize, action: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("malformed dataset file {path} line {line}: {message}")]
    MalformedDataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
