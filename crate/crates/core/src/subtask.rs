//! Null-space objectives for kinematically redundant arms.
//!
//! A subtask produces a desired joint velocity `phi(q)`; the controller
//! projects it through the Jacobian null space, so it shapes the arm's
//! internal motion without disturbing the end effector. Two-joint arms have
//! an empty null space and any subtask is silently inert for them.

use nalgebra::{DMatrix, DVector};

use crate::arm::ManipulatorModel;
use crate::error::{ModelError, ScenarioError};

/// Finite-difference step for the manipulability gradient.
pub const MANIPULABILITY_FD_STEP: f64 = 1e-6;

/// A per-arm secondary objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Subtask {
    /// No null-space motion requested.
    None,
    /// Drive one joint toward a fixed angle: `phi = -gain (q[joint] - target)`
    /// on that joint, zero elsewhere. `joint` is zero-based here; scenario
    /// files use one-based numbering and convert on parse.
    JointTarget {
        joint: usize,
        target: f64,
        gain: f64,
    },
    /// Climb the manipulability measure `det(J J^T)`:
    /// `phi = gain * grad_q m(q)`, the gradient taken by central differences.
    Manipulability { gain: f64 },
}

impl Subtask {
    pub fn validate(&self, dof: usize) -> Result<(), ScenarioError> {
        match self {
            Self::None => Ok(()),
            Self::JointTarget {
                joint,
                target,
                gain,
            } => {
                if *joint >= dof {
                    return Err(ScenarioError::Invalid(format!(
                        "subtask joint {} out of range for a {}-joint arm",
                        joint + 1,
                        dof
                    )));
                }
                if !target.is_finite() || !gain.is_finite() || *gain < 0.0 {
                    return Err(ScenarioError::Invalid(
                        "subtask target and gain must be finite, gain nonnegative".into(),
                    ));
                }
                Ok(())
            }
            Self::Manipulability { gain } => {
                if !gain.is_finite() || *gain < 0.0 {
                    return Err(ScenarioError::Invalid(
                        "manipulability gain must be finite and nonnegative".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Desired null-space joint velocity at configuration `q`.
    pub fn phi(
        &self,
        model: &ManipulatorModel,
        q: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let p = model.dof();
        match self {
            Self::None => Ok(DVector::zeros(p)),
            Self::JointTarget {
                joint,
                target,
                gain,
            } => {
                let mut out = DVector::zeros(p);
                out[*joint] = -gain * (q[*joint] - target);
                Ok(out)
            }
            Self::Manipulability { gain } => {
                Ok(*gain * manipulability_gradient(model, q, MANIPULABILITY_FD_STEP)?)
            }
        }
    }

    /// Time derivative of `phi` along a trajectory with velocity `qdot`.
    ///
    /// The joint-target case is analytic. The manipulability case takes a
    /// directional finite difference of the gradient, which is accurate
    /// enough for the feedforward term it feeds.
    pub fn phi_rate(
        &self,
        model: &ManipulatorModel,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let p = model.dof();
        match self {
            Self::None => Ok(DVector::zeros(p)),
            Self::JointTarget { joint, gain, .. } => {
                let mut out = DVector::zeros(p);
                out[*joint] = -gain * qdot[*joint];
                Ok(out)
            }
            Self::Manipulability { gain } => {
                let speed = qdot.norm();
                if speed == 0.0 {
                    return Ok(DVector::zeros(p));
                }
                let h = 1e-5 / speed.max(1.0);
                let fp = manipulability_gradient(model, &(q + h * qdot), MANIPULABILITY_FD_STEP)?;
                let fm = manipulability_gradient(model, &(q - h * qdot), MANIPULABILITY_FD_STEP)?;
                Ok(*gain * (fp - fm) / (2.0 * h))
            }
        }
    }
}

/// The manipulability measure `m(q) = det(J J^T)`, which vanishes exactly at
/// singular configurations and grows with distance from them.
pub fn manipulability(model: &ManipulatorModel, q: &DVector<f64>) -> Result<f64, ModelError> {
    let j = model.jacobian(q)?;
    let g: DMatrix<f64> = &j * j.transpose();
    Ok(g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)])
}

/// Central-difference gradient of the manipulability measure.
pub fn manipulability_gradient(
    model: &ManipulatorModel,
    q: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>, ModelError> {
    let p = model.dof();
    let mut grad = DVector::zeros(p);
    let mut qp = q.clone();
    let mut qm = q.clone();
    for m in 0..p {
        qp[m] = q[m] + step;
        qm[m] = q[m] - step;
        grad[m] = (manipulability(model, &qp)? - manipulability(model, &qm)?) / (2.0 * step);
        qp[m] = q[m];
        qm[m] = q[m];
    }
    Ok(grad)
}
