use thiserror::Error;

/// Errors produced by the deblurring library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeblurError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical singularity: {0}")]
    NumericalSingularity(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("line search exhausted: step fell below {floor:e}")]
    StepFailure { floor: f64 },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("image has no usable edges")]
    NoEdges,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, DeblurError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DeblurError::InvalidArgument(msg.into()))
}
