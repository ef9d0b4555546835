use thiserror::Error;

/// Errors raised by the periodized-set laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unknown perturbation mode `{0}`")]
    UnknownMode(String),

    #[error("invalid family `{spec}`: {reason}")]
    InvalidFamily { spec: String, reason: String },

    #[error("unsupported dimension {0} (mesh extraction handles n = 2 and n = 3)")]
    UnsupportedDimension(usize),

    #[error("fiber along axis {axis} through {point:?} has no sign change")]
    EmptyFiber { axis: usize, point: Vec<f64> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
