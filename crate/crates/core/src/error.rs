//! Error types shared across the crate.

use thiserror::Error;

/// Errors from model construction and the dynamics/kinematics operations.
#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// The task Jacobian lost rank; its smallest singular value fell below
    /// the model's tolerance. Carried up as a simulation abort.
    #[error("singular jacobian: smallest singular value {sigma_min:.3e} below {tol:.3e}")]
    SingularJacobian { sigma_min: f64, tol: f64 },
    /// Operation only defined for arms with more joints than task dimensions.
    #[error("arm with {dof} joints has no null space for {what}")]
    NotRedundant { dof: usize, what: &'static str },
    #[error("inertia matrix is not positive definite at the queried configuration")]
    NotPositiveDefinite,
}

/// Errors from the estimator/controller layer.
#[derive(Debug, Clone, Error)]
pub enum DceaError {
    /// A settle-time denominator `beta_k - sup` came out nonpositive, so the
    /// finite-time bound does not exist for the given gains and reference.
    #[error("nonpositive settle margin for component {component}: beta={beta}, sup={sup}")]
    NonpositiveMargin {
        component: usize,
        beta: f64,
        sup: f64,
    },
    /// A pinned node needs the reference signal but none was supplied.
    #[error("node {node} is pinned but no reference signal is available")]
    MissingLeader { node: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors raised while running a scenario.
#[derive(Debug, Error)]
pub enum SimError {
    /// An arm's Jacobian became singular mid-run. The run stops rather than
    /// regularizing, so near-singular behavior is never silently masked.
    #[error("run aborted at t={time:.6}: arm {arm} hit a singular jacobian at q={q:?}")]
    SingularJacobian { arm: usize, time: f64, q: Vec<f64> },
    /// A state or torque became NaN/infinite. Same abort-over-clamp policy.
    #[error("run aborted at t={time:.6}: arm {arm} produced a non-finite {what}")]
    NonfiniteState {
        arm: usize,
        time: f64,
        what: &'static str,
    },
    #[error("scenario is not runnable: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dcea(#[from] DceaError),
}

/// Errors from trace serialization and deserialization.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace schema mismatch: missing column {0}")]
    MissingColumn(String),
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("trace has no data rows")]
    Empty,
}

/// Errors from scenario parsing and validation.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Syntax or unknown-key errors; the inner message carries line/column.
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation failed: {0}")]
    Invalid(String),
}
