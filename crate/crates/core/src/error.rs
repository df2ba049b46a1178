use thiserror::Error;

/// Errors raised by graph construction and graph queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid variable name {0:?}: expected an uppercase identifier")]
    InvalidVariable(String),
    #[error("duplicate variable {0}")]
    DuplicateVariable(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("edge {0}-{1} listed more than once")]
    DuplicateEdge(String, String),
    #[error("too many variables: {0} (maximum {max})", max = crate::graph::MAX_NODES)]
    TooManyNodes(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Errors raised by the PC engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("inconsistent premise: {0}")]
    Inconsistent(String),
}
