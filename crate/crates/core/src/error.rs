use thiserror::Error;

/// Errors surfaced by the kernels, the reducer, and the encoder.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible (e.g. matmul inner dimensions).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A caller-supplied value is out of range or malformed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Non-finite values where finite input is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A documented precondition was violated (e.g. non-row-stochastic
    /// attention map, non-positive scale vector).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Weight manifest or blob is inconsistent with the model config.
    #[error("weight store: {0}")]
    WeightStore(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
