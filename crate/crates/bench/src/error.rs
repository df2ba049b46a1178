use thiserror::Error;

use pcdisco_core::{GraphError, PcError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no recognizable statement in premise: {0:?}")]
    EmptyPremise(String),
    #[error("unrecognized hypothesis: {0:?}")]
    UnknownHypothesis(String),
    #[error("invalid premise: {0}")]
    InvalidPremise(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pc(#[from] PcError),
    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}
