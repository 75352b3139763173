use thiserror::Error;

use crate::distributions::MomentCondition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("radius law violates the {condition}")]
    MomentCondition { condition: MomentCondition },

    #[error("laws are not mutually absolutely continuous at component {component}")]
    AbsoluteContinuity { component: usize },

    #[error("initial interval [{lo}, {hi}] does not bracket the crossing target {target} (p(lo) = {p_lo}, p(hi) = {p_hi})")]
    NonBracketing { lo: f64, hi: f64, target: f64, p_lo: f64, p_hi: f64 },
}
