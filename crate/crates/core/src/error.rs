//! Error types shared across the crate.

use crate::types::ActionMeasure;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("weights must be finite and nonnegative (index {index}, value {value})")]
    InvalidWeight { index: usize, value: f64 },

    #[error("not a probability distribution: |l1 - 1| = {deviation:e} exceeds tolerance")]
    NotADistribution { deviation: f64 },

    #[error("function class must contain at least one function")]
    EmptyFunctionClass,

    #[error("function value out of [0, 1]: {value} at (function {function}, action {action})")]
    ValueOutOfRange {
        function: usize,
        action: usize,
        value: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("smoothing configuration rejected: {reason}")]
    SmoothingConfig { reason: String },

    #[error("benchmark set requires a context to resolve")]
    ContextRequired,

    #[error("no benchmark entry for context {context}")]
    UnknownContext { context: usize },

    #[error("operation unsupported for this benchmark kind: {reason}")]
    UnsupportedKind { reason: &'static str },

    #[error("resource budget exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceBudget {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error(
        "design certification failed after {iterations} iterations (sec_bound {sec_bound}); \
         the bound is too small for this instance"
    )]
    CertificationFailure {
        iterations: usize,
        sec_bound: f64,
        last_iterate: Box<ActionMeasure>,
        violating_vertex: Box<ActionMeasure>,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
