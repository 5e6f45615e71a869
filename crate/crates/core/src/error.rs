use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("legitimate subgraph is disconnected ({reached} of {total} legitimate agents reachable from agent 0)")]
    Disconnected { reached: usize, total: usize },

    #[error("invalid trust model: {0}")]
    TrustModel(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid bound parameters: {0}")]
    BoundParams(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("malicious strategy emitted a value outside the constraint set at t={t} on edge ({from}, {to})")]
    StrategyOutsideSet { t: usize, from: usize, to: usize },

    #[error("invariant breach at round {round}: {what}")]
    Invariant { round: usize, what: String },

    #[error("run with seed {seed} failed")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {origin} line {line}: {msg}")]
    Parse {
        origin: String,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            msg: msg.into(),
        }
    }
}
