use thiserror::Error;

use crate::fields::Trajectory;
use crate::metric_core::FeasibilityReport;

pub type Result<T, E = MetrikosError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MetrikosError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("coordinates are infeasible ({} violated inequalities)", .0.violations.len())]
    Infeasible(FeasibilityReport),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("field component {component} evaluated to {value}")]
    InvalidField { component: usize, value: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("locus is empty: {0}")]
    EmptyLocus(String),

    #[error("integration aborted at t = {time}: {reason}")]
    Integration { time: f64, reason: String, partial: Box<Trajectory> },
}

impl MetrikosError {
    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        MetrikosError::ShapeMismatch { expected: expected.into(), found: found.into() }
    }
}
