use thiserror::Error;

/// Errors raised by the physics library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("parameter `{name}` out of range: {reason}")]
    OutOfRange { name: &'static str, reason: String },

    #[error("grid too narrow: captured probability {captured}")]
    GridTooNarrow { captured: f64 },

    #[error("grid aliasing detected: {leak:e} of the probability reached the grid edge")]
    GridAliasing { leak: f64 },

    #[error("step budget exceeded: {required} steps needed, cap is {cap}")]
    StepBudgetExceeded { required: u64, cap: u64 },

    #[error("measurement bin {bin} is empty (probability {probability:e})")]
    EmptyBin { bin: i64, probability: f64 },

    #[error("unsupported clock: {0}")]
    UnsupportedClock(String),

    #[error("result is not real: imaginary part {imag:e} in {quantity}")]
    NotReal { quantity: &'static str, imag: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range(name: &'static str, reason: impl Into<String>) -> Error {
    Error::OutOfRange {
        name,
        reason: reason.into(),
    }
}
