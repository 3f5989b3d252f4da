use thiserror::Error;

use crate::expr::ParseError;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("variance mismatch between slot {left} and slot {right}")]
    VarianceMismatch { left: usize, right: usize },
    #[error("slot index {0} out of range")]
    SlotOutOfRange(usize),
    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("projection onto PSD forms produced the zero matrix")]
    DegeneratePsd,
    #[error("zero vector where a nonzero direction is required")]
    ZeroVector,
    #[error("frame mismatch: expected {expected} frame")]
    FrameMismatch { expected: &'static str },
    #[error("point {0} lies outside the validity region")]
    OutsideRegion(String),
    #[error("finite-difference stencil leaves the validity region at {0}")]
    StencilOutOfRegion(String),
    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),
    #[error("division by zero while evaluating an expression")]
    DivisionByZero,
    #[error("conjugation-symmetry residual {residual:e} exceeds {limit:e}")]
    ConjugationSymmetry { residual: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("metric file: {0}")]
    MetricFile(String),
    #[error("Gauduchon parameter t = {0} is a pole of the inverse formula")]
    GauduchonPole(f64),
    #[error("tau = {value} is not valid in the {role} role")]
    TauRole { value: f64, role: &'static str },
    #[error("no valid sample within the budget")]
    BudgetExhausted,
    #[error("explicit Euler step rejected after {0} halvings")]
    StepRejected(u32),
    #[error("holomorphic map is not holomorphic: {0}")]
    NotHolomorphic(String),
}

pub type Result<T> = std::result::Result<T, CurvError>;
