//! Reference trajectory generators.
//!
//! The reference is a planar signal with position, velocity, and
//! acceleration available in closed form, plus known elementwise bounds on
//! position, velocity, and acceleration used when sizing estimator gains.

use nalgebra::{DVector, Vector2};

use crate::error::ScenarioError;

/// A twice-differentiable planar reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderTrajectory {
    /// `x(t) = center + (rx sin(w t + phase), ry cos(w t + phase))`.
    Ellipse {
        center: Vector2<f64>,
        radii: Vector2<f64>,
        angular_rate: f64,
        phase: f64,
    },
    /// A constant point with zero derivatives.
    Fixed { point: Vector2<f64> },
}

impl LeaderTrajectory {
    /// The benchmark ellipse: center (1.2, 1.3), radii (0.5, 0.3), rate pi.
    pub fn benchmark_ellipse() -> Self {
        Self::Ellipse {
            center: Vector2::new(1.2, 1.3),
            radii: Vector2::new(0.5, 0.3),
            angular_rate: std::f64::consts::PI,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            Self::Ellipse {
                center,
                radii,
                angular_rate,
                phase,
            } => {
                let vals = [center.x, center.y, radii.x, radii.y, *angular_rate, *phase];
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(ScenarioError::Invalid(
                        "non-finite ellipse parameter".into(),
                    ));
                }
                if radii.x < 0.0 || radii.y < 0.0 {
                    return Err(ScenarioError::Invalid("negative ellipse radius".into()));
                }
                Ok(())
            }
            Self::Fixed { point } => {
                if point.iter().any(|v| !v.is_finite()) {
                    return Err(ScenarioError::Invalid("non-finite fixed point".into()));
                }
                Ok(())
            }
        }
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        match self {
            Self::Ellipse {
                center,
                radii,
                angular_rate,
                phase,
            } => {
                let a = angular_rate * t + phase;
                Vector2::new(center.x + radii.x * a.sin(), center.y + radii.y * a.cos())
            }
            Self::Fixed { point } => *point,
        }
    }

    pub fn velocity(&self, t: f64) -> Vector2<f64> {
        match self {
            Self::Ellipse {
                radii,
                angular_rate,
                phase,
                ..
            } => {
                let a = angular_rate * t + phase;
                Vector2::new(
                    radii.x * angular_rate * a.cos(),
                    -radii.y * angular_rate * a.sin(),
                )
            }
            Self::Fixed { .. } => Vector2::zeros(),
        }
    }

    pub fn acceleration(&self, t: f64) -> Vector2<f64> {
        match self {
            Self::Ellipse {
                radii,
                angular_rate,
                phase,
                ..
            } => {
                let a = angular_rate * t + phase;
                let w2 = angular_rate * angular_rate;
                Vector2::new(-radii.x * w2 * a.sin(), -radii.y * w2 * a.cos())
            }
            Self::Fixed { .. } => Vector2::zeros(),
        }
    }

    /// Tight suprema of |position|, |velocity|, |acceleration| over all time,
    /// taken elementwise then maxed; used to check estimator gain margins.
    pub fn sup_bounds(&self) -> [f64; 3] {
        match self {
            Self::Ellipse {
                center,
                radii,
                angular_rate,
                ..
            } => {
                let w = angular_rate.abs();
                let pos = (center.x.abs() + radii.x).max(center.y.abs() + radii.y);
                let vel = w * radii.x.max(radii.y);
                let acc = w * w * radii.x.max(radii.y);
                [pos, vel, acc]
            }
            Self::Fixed { point } => [point.amax(), 0.0, 0.0],
        }
    }

    /// Tight elementwise suprema of the first three derivatives:
    /// `[sup |velocity|, sup |acceleration|, sup |jerk|]`. The estimator's
    /// switching gains must exceed these, component for component, for the
    /// finite-time settle guarantee.
    pub fn derivative_sups(&self) -> [f64; 3] {
        match self {
            Self::Ellipse {
                radii,
                angular_rate,
                ..
            } => {
                let w = angular_rate.abs();
                let r = radii.x.max(radii.y);
                [w * r, w * w * r, w * w * w * r]
            }
            Self::Fixed { .. } => [0.0, 0.0, 0.0],
        }
    }

    /// Position, velocity, and acceleration stacked as one 6-vector in the
    /// estimator's state layout: (x, v, a), two entries each.
    pub fn stack(&self, t: f64) -> DVector<f64> {
        let x = self.position(t);
        let v = self.velocity(t);
        let a = self.acceleration(t);
        DVector::from_vec(vec![x.x, x.y, v.x, v.y, a.x, a.y])
    }
}
