use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("truncation level mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },

    #[error("letter {letter} is outside 1..={dim}")]
    InvalidLetter { letter: usize, dim: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid diagram: {0}")]
    InvalidDiagram(&'static str),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("capability exceeded: {what} = {value} (limit {limit})")]
    Capability {
        what: &'static str,
        value: u64,
        limit: u64,
    },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("matrix is not positive definite: pivot {index} = {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
}
