use std::io;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polynomial order {0}: must be even and at least 2")]
    InvalidOrder(usize),

    #[error("invalid interval [{lower}, {upper}]: bounds must be finite with lower < upper")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unsupported dimension {0}: only d = 1, 2, 3 are supported")]
    UnsupportedDimension(usize),

    #[error("eigendecomposition failed (residual {residual:e})")]
    DecompositionFailed { residual: f64 },

    #[error("eigenvector basis is ill-conditioned (condition estimate {condition:e})")]
    IllConditionedBasis { condition: f64 },

    #[error("reconstruction of component {component} is not real: re = {real:e}, im = {imag:e}")]
    RealnessViolation {
        component: usize,
        real: f64,
        imag: f64,
    },

    #[error("solution diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("right-hand side is singular at state {state:?}")]
    SingularInput { state: Vec<f64> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time {t} outside the solution interval [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("segment anchored at t = {anchor_time}: {source}")]
    Segment {
        anchor_time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips any segment context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Segment { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical solve itself (as opposed to bad
    /// arguments or I/O).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::DecompositionFailed { .. }
                | Error::IllConditionedBasis { .. }
                | Error::RealnessViolation { .. }
                | Error::Divergence { .. }
                | Error::SingularInput { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
