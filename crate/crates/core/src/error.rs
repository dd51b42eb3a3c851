use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot normalize a vector of norm {norm:e}")]
    ZeroNorm { norm: f64 },

    #[error("non-finite value {value} at quadrature node z = {node}")]
    NonFiniteAtNode { node: f64, value: f64 },

    #[error("non-finite {what} (replay seed {seed:#018x}, step {step})")]
    NonFinite { what: &'static str, seed: u64, step: u64 },

    #[error("no information exponent detected up to order {order}")]
    NoExponent { order: usize },

    #[error("population profile violates the negativity condition on (0, 1); pass force to run anyway")]
    AssumptionAViolated,

    #[error("envelope blows up at t = {blowup_time:.6e}")]
    Blowup { blowup_time: f64 },

    #[error("empty step-size window: delta {delta:.3e} is below 2/alpha = {lower:.3e}; increase alpha")]
    EmptyStepWindow { delta: f64, lower: f64 },

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
