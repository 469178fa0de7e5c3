use thiserror::Error;

pub type Result<T> = std::result::Result<T, FmsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FmsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("degenerate input: numerical rank {rank} is below the required {required}")]
    Degenerate { rank: usize, required: usize },
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "outlier fraction {fraction} violates the recoverability bound (D-d)/D = ({ambient}-{dim})/{ambient} = {bound}"
    )]
    BoundViolation {
        fraction: f64,
        bound: f64,
        ambient: usize,
        dim: usize,
    },
}

impl FmsError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        FmsError::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        FmsError::InvalidParameter(msg.into())
    }
}
