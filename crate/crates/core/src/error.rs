// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    Indefinite { eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {left_len}x{left_dim} vs {right_len}x{right_dim}")]
    ShapeMismatch {
        left_len: usize,
        left_dim: usize,
        right_len: usize,
        right_dim: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("global alignment accumulator left the representable range")]
    NumericalUnderflow,

    #[error("Volterra kernel undefined: 1 - tau^2 <x_t, y_t> = {margin:e} at step {step}")]
    DomainViolation { step: usize, margin: f64 },

    #[error("truncation level {level} exceeds the limit of {max}")]
    LevelTooLarge { level: usize, max: usize },

    #[error("signature PDE solution is not finite; rescale the inputs")]
    NonFiniteSolution,

    #[error("explicit signature too large: dim {dim}, level {level}")]
    OracleTooLarge { dim: usize, level: usize },

    #[error("kernel failure: {0}")]
    KernelFailure(String),

    #[error("statistics source is empty")]
    EmptyStats,

    #[error("corpus needs at least {needed} series, got {got}")]
    CorpusTooSmall { needed: usize, got: usize },

    #[error("metric needs both outliers and normals")]
    SingleClass,

    #[error("normal class {class:?} has {got} training members, need at least {needed}")]
    InsufficientNormals {
        class: String,
        got: usize,
        needed: usize,
    },

    #[error("every grid point failed: {0}")]
    NoViableGridPoint(String),

    #[error("model file version {found} is not supported (expected {expected})")]
    ModelVersionMismatch { found: u32, expected: u32 },

    #[error("model file malformed: {0}")]
    ModelFormat(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that come from the numerics rather than from
    /// malformed input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonSymmetric { .. }
                | Error::ConvergenceFailure { .. }
                | Error::Indefinite { .. }
                | Error::NumericalUnderflow
                | Error::DomainViolation { .. }
                | Error::NonFiniteSolution
                | Error::KernelFailure(_)
                | Error::SingleClass
                | Error::NoViableGridPoint(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
