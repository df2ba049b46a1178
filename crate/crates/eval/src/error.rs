use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("no samples to score")]
    Empty,
    #[error("variable mismatch: {0}")]
    VariableMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
