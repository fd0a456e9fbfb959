use thiserror::Error;

use crate::dynamics::TrajectorySample;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is not on the upper hyperboloid sheet: {0}")]
    InvalidPoint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("momentum value is zero, the orbit is undefined")]
    DegenerateMomentum,

    #[error("vortices {i} and {j} collide (separation {separation:e})")]
    Collision { i: usize, j: usize, separation: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        last: Box<TrajectorySample>,
    },

    #[error("directions span a plane containing vortex {0}")]
    InvalidDirections(usize),

    #[error("degenerate symplectic normal basis: {0}")]
    DegenerateBasis(String),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("configuration is not a relative equilibrium (residual {residual:e})")]
    NotRelativeEquilibrium { residual: f64 },
}
