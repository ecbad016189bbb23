use thiserror::Error;

use crate::ensembles::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("invalid ensemble: {0}")]
    InvalidSpec(Violation),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("budget exceeded: {what} needs {needed} but the budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: f64,
        budget: f64,
    },

    #[error("certificate hypothesis violated at triple {triple}: {reason}")]
    HypothesisViolation { triple: usize, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("likelihood underflow: yes-side likelihood of a sampled profile is zero")]
    DegenerateLikelihood,
}

pub type Result<T> = std::result::Result<T, Error>;
