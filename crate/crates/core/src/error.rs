use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("step size too large at node {node}, step {step}: dt * exit rate = {ratio:.4} exceeds {limit}")]
    StepSize { node: usize, step: usize, ratio: f64, limit: f64 },

    #[error("search bound {bound} too small: maximizer sits on the boundary")]
    BoundTooSmall { bound: f64 },

    #[error("scheme produced weight {value:e} at node {node}, step {step}")]
    Scheme { node: usize, step: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("trajectory of particle {particle} diverged at step {step}")]
    Divergence { particle: usize, step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
