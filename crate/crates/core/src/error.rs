use thiserror::Error;

/// Errors raised by the discretization, solvers and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(
        "potential breakpoint {breakpoint} does not coincide with a mesh node (nearest node {nearest}, h = {spacing})"
    )]
    BreakpointOffNode {
        breakpoint: f64,
        nearest: f64,
        spacing: f64,
    },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("time step {step}: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("zero pivot at row {row} in tridiagonal elimination")]
    ZeroPivot { row: usize },

    #[error("field has zero L2 norm; moments are undefined")]
    ZeroField,

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("bandwidth {bandwidth} is below the minimum of {minimum} (two sample spacings)")]
    BandwidthTooSmall { bandwidth: f64, minimum: f64 },

    #[error("frequency grid too coarse: {per_unit:.2} points per unit frequency, need at least 16")]
    GridTooCoarse { per_unit: f64 },

    #[error("aliasing risk: {fraction:e} of the field mass lies within {cells} cells of the Fourier span edge")]
    Aliasing { fraction: f64, cells: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
