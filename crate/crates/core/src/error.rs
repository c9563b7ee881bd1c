use thiserror::Error;

/// Errors produced by the library operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sublevel radius must be nonnegative, got {0}")]
    NegativeLevel(f64),

    #[error("a window radius is required: {0}")]
    WindowRequired(String),

    #[error("matrix dimension {0} exceeds the supported limit of 8")]
    UnsupportedDimension(usize),

    #[error("matrix entries must be finite")]
    NonFiniteEntry,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ellipticity violated: sampled coercivity floor a0 = {a0}")]
    EllipticityViolation { a0: f64 },

    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    #[error("non-positive normalizing determinant: {0}")]
    NonPositiveDenominator(f64),

    #[error("invalid truncation set: {0}")]
    InvalidTruncation(String),

    #[error("truncation weight is not certified compact; pass an explicit frequency set: {0}")]
    TruncationNotCertified(String),

    #[error("eigensolver failed to converge on a {size}x{size} matrix")]
    EigensolverFailure { size: usize },

    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("invalid spectral field: {0}")]
    InvalidField(String),
}

pub type Result<T> = std::result::Result<T, Error>;
