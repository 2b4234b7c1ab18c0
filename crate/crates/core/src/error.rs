//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation. Carries the field name so
    /// callers can point at the offending entry.
    #[error("invalid config: field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// A structural identity of the discretized model failed (e.g. the
    /// measured rows of the feedforward channel did not vanish, or the
    /// residual-inversion vector is numerically zero).
    #[error("model structure violated: {0}")]
    ModelStructure(String),

    /// The SDP backend reported the problem infeasible.
    #[error("semidefinite program infeasible: {0}")]
    Infeasible(String),

    /// The SDP backend broke down numerically.
    #[error("numerical failure in SDP solve: {0}")]
    NumericalFailure(String),

    /// Every grid point of a scalar line search failed. Carries the
    /// per-point statuses for diagnostics.
    #[error("all {0} grid points failed: {1}")]
    AllGridPointsFailed(usize, String),

    /// A synthesized design violates a post-condition (e.g. the estimator
    /// error map is not Schur stable).
    #[error("synthesis post-check failed: {0}")]
    SynthesisPostCheck(String),

    /// Ellipsoid projection hit a singular trailing block.
    #[error("projection failed: {0}")]
    Projection(String),

    /// A critical-state half-space the distance formula cannot handle.
    #[error("invalid critical set: {0}")]
    CriticalSet(String),

    /// Non-finite values in streamed data or simulated state.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// Simulation blew up or a scenario was inconsistent with the designs.
    #[error("simulation error: {0}")]
    Simulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
