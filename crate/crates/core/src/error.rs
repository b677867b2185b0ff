use thiserror::Error;

/// Errors raised by the geometry, quadrature, transform and inversion kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate flat: basis vectors are linearly dependent")]
    DegenerateFlat,

    #[error("direction is not orthogonal to the flat (residual {0:.3e})")]
    NotOrthogonal(f64),

    #[error("pole singularity: point coincides with the north pole")]
    PoleSingularity,

    #[error("plane does not meet the equatorial hyperplane")]
    TangentPlane,

    #[error("integrand blowup: non-finite value {value} at {location}")]
    IntegrandBlowup { value: f64, location: String },

    #[error("existence condition failed: {0}")]
    ExistenceFailed(String),

    #[error("p out of admissible range: p = {p}, admissible [1, {upper})")]
    POutOfRange { p: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("callback failed: {0}")]
    Callback(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
