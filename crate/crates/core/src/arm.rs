//! Rigid-body dynamics and kinematics of planar revolute chains.
//!
//! A [`ManipulatorModel`] describes a serial chain of 2 or 3 links moving in
//! a vertical plane, each link a rigid body with mass, length, center-of-mass
//! offset, and rotational inertia. Joint angles are relative; the task space
//! is the end-effector position in the plane.
//!
//! The equations of motion take the standard form
//! `H(q) qdd + C(q, qd) qd + g(q) = u`. `H`, `C`, and `g` are assembled here
//! from per-link center-of-mass Jacobians, with `C` built from Christoffel
//! symbols of the analytic `dH/dq` so that `dH/dt - 2C` is exactly
//! skew-symmetric. The lumped-parameter route used by the adaptive controller
//! lives in [`crate::regressor`] and is deliberately a separate derivation;
//! tests cross-check the two against each other.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::ModelError;
use crate::regressor;

/// Default lower bound on the Jacobian's smallest singular value.
pub const DEFAULT_SINGULARITY_TOL: f64 = 1e-6;

/// Gravitational acceleration used by the benchmark scenarios, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Joint position and velocity of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    /// Joint angles, rad.
    pub q: DVector<f64>,
    /// Joint velocities, rad/s.
    pub qdot: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn zeros(dof: usize) -> Self {
        Self {
            q: DVector::zeros(dof),
            qdot: DVector::zeros(dof),
        }
    }
}

/// A planar revolute chain with 2 or 3 joints.
///
/// All vectors are indexed base-to-tip. Angles are measured counterclockwise,
/// joint 1 relative to the +x axis and each later joint relative to the
/// previous link. Gravity acts along -y.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel {
    /// Link masses, kg.
    masses: Vec<f64>,
    /// Link lengths (joint-to-joint), m.
    lengths: Vec<f64>,
    /// Distance from each joint to its link's center of mass, m.
    com_offsets: Vec<f64>,
    /// Rotational inertias about each link's center of mass, kg m^2.
    inertias: Vec<f64>,
    /// Gravitational acceleration, m/s^2 (0 models a horizontal plane).
    gravity: f64,
    /// Smallest admissible singular value of the task Jacobian.
    singularity_tol: f64,
    /// Lumped dynamic parameters; fixed at construction.
    theta: DVector<f64>,
}

impl ManipulatorModel {
    /// Builds a model and its lumped parameter vector.
    ///
    /// `masses` must be positive, `inertias` nonnegative, and each
    /// `com_offsets[k]` in `(0, lengths[k]]`. Only 2- and 3-link chains are
    /// supported.
    pub fn new(
        masses: Vec<f64>,
        lengths: Vec<f64>,
        com_offsets: Vec<f64>,
        inertias: Vec<f64>,
        gravity: f64,
    ) -> Result<Self, ModelError> {
        let dof = masses.len();
        if !(2..=3).contains(&dof) {
            return Err(ModelError::InvalidParameter(format!(
                "supported chains have 2 or 3 links, got {dof}"
            )));
        }
        for (name, v) in [
            ("lengths", &lengths),
            ("com_offsets", &com_offsets),
            ("inertias", &inertias),
        ] {
            if v.len() != dof {
                return Err(ModelError::DimensionMismatch {
                    what: "model parameter arrays",
                    expected: dof,
                    got: v.len(),
                });
            }
            let _ = name;
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "masses must be positive".into(),
            ));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "lengths must be positive".into(),
            ));
        }
        if inertias.iter().any(|&i| i < 0.0 || !i.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "inertias must be nonnegative".into(),
            ));
        }
        for k in 0..dof {
            if !(com_offsets[k] > 0.0 && com_offsets[k] <= lengths[k]) {
                return Err(ModelError::InvalidParameter(format!(
                    "com_offsets[{k}] must lie in (0, lengths[{k}]]"
                )));
            }
        }
        if !gravity.is_finite() || gravity < 0.0 {
            return Err(ModelError::InvalidParameter(
                "gravity must be finite and nonnegative".into(),
            ));
        }
        let theta = regressor::theta_from_physical(&masses, &lengths, &com_offsets, &inertias);
        Ok(Self {
            masses,
            lengths,
            com_offsets,
            inertias,
            gravity,
            singularity_tol: DEFAULT_SINGULARITY_TOL,
            theta,
        })
    }

    /// Overrides the singular-value tolerance used by pseudoinverse routines.
    pub fn with_singularity_tol(mut self, tol: f64) -> Self {
        self.singularity_tol = tol;
        self
    }

    pub fn dof(&self) -> usize {
        self.masses.len()
    }

    /// True when the chain has more joints than task dimensions.
    pub fn is_redundant(&self) -> bool {
        self.dof() > 2
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn com_offsets(&self) -> &[f64] {
        &self.com_offsets
    }

    pub fn inertias(&self) -> &[f64] {
        &self.inertias
    }

    pub fn singularity_tol(&self) -> f64 {
        self.singularity_tol
    }

    /// The lumped dynamic parameters paired with [`crate::regressor::regressor`]:
    /// 5 entries for a 2-link chain, 9 for a 3-link chain.
    pub fn theta_true(&self) -> &DVector<f64> {
        &self.theta
    }

    fn check_dim(&self, v: &DVector<f64>, what: &'static str) -> Result<(), ModelError> {
        if v.len() != self.dof() {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: self.dof(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Cumulative link angles `theta_k = q_1 + ... + q_k`.
    fn cumulative_angles(&self, q: &DVector<f64>) -> Vec<f64> {
        let mut acc = 0.0;
        q.iter()
            .map(|&qi| {
                acc += qi;
                acc
            })
            .collect()
    }

    /// Center-of-mass Jacobians of every link, each 2 x dof.
    ///
    /// Column i of link k's Jacobian is the velocity of that link's center of
    /// mass per unit rate of joint i.
    fn com_jacobians(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let p = self.dof();
        let th = self.cumulative_angles(q);
        let mut jacs = Vec::with_capacity(p);
        for k in 0..p {
            let mut jk = DMatrix::zeros(2, p);
            // proximal links contribute their full length, link k its com offset
            for j in 0..=k {
                let len = if j == k {
                    self.com_offsets[k]
                } else {
                    self.lengths[j]
                };
                let (s, c) = th[j].sin_cos();
                for i in 0..=j {
                    jk[(0, i)] += -len * s;
                    jk[(1, i)] += len * c;
                }
            }
            jacs.push(jk);
        }
        jacs
    }

    /// Partial derivatives of every center-of-mass Jacobian with respect to
    /// each joint angle: `out[k][m] = d J_k / d q_m`.
    fn com_jacobian_partials(&self, q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        let p = self.dof();
        let th = self.cumulative_angles(q);
        let mut out = Vec::with_capacity(p);
        for k in 0..p {
            let mut per_m = vec![DMatrix::zeros(2, p); p];
            for j in 0..=k {
                let len = if j == k {
                    self.com_offsets[k]
                } else {
                    self.lengths[j]
                };
                let (s, c) = th[j].sin_cos();
                // d/dq_m of (-len sin, len cos) is (-len cos, -len sin) for m <= j
                for m in 0..=j {
                    for i in 0..=j {
                        per_m[m][(0, i)] += -len * c;
                        per_m[m][(1, i)] += -len * s;
                    }
                }
            }
            out.push(per_m);
        }
        out
    }

    /// Inertia matrix `H(q)`, symmetric positive definite.
    pub fn inertia_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        self.check_dim(q, "inertia_matrix q")?;
        let p = self.dof();
        let jacs = self.com_jacobians(q);
        let mut h = DMatrix::zeros(p, p);
        for k in 0..p {
            h += self.masses[k] * (jacs[k].transpose() * &jacs[k]);
            // angular part: link k turns with q_1 + ... + q_k
            for i in 0..=k {
                for j in 0..=k {
                    h[(i, j)] += self.inertias[k];
                }
            }
        }
        Ok(h)
    }

    /// Partial derivatives `dH/dq_m` for all m, used for Christoffel symbols.
    fn inertia_partials(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let p = self.dof();
        let jacs = self.com_jacobians(q);
        let parts = self.com_jacobian_partials(q);
        let mut out = vec![DMatrix::zeros(p, p); p];
        for m in 0..p {
            for k in 0..p {
                let a = parts[k][m].transpose() * &jacs[k];
                out[m] += self.masses[k] * (&a + a.transpose());
            }
        }
        out
    }

    /// Coriolis/centrifugal matrix `C(q, qd)` from Christoffel symbols.
    ///
    /// This construction makes `dH/dt - 2C` skew-symmetric and `C` linear in
    /// the joint velocities.
    pub fn coriolis_matrix(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DMatrix<f64>, ModelError> {
        self.check_dim(q, "coriolis_matrix q")?;
        self.check_dim(qdot, "coriolis_matrix qdot")?;
        let p = self.dof();
        let dh = self.inertia_partials(q);
        let mut c = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let mut cij = 0.0;
                for m in 0..p {
                    cij += 0.5 * (dh[m][(i, j)] + dh[j][(i, m)] - dh[i][(j, m)]) * qdot[m];
                }
                c[(i, j)] = cij;
            }
        }
        Ok(c)
    }

    /// Time derivative of `H` along a trajectory with velocity `qdot`.
    pub fn inertia_matrix_dot(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DMatrix<f64>, ModelError> {
        self.check_dim(q, "inertia_matrix_dot q")?;
        self.check_dim(qdot, "inertia_matrix_dot qdot")?;
        let dh = self.inertia_partials(q);
        let p = self.dof();
        let mut hdot = DMatrix::zeros(p, p);
        for m in 0..p {
            hdot += &dh[m] * qdot[m];
        }
        Ok(hdot)
    }

    /// Gravity torque vector `g(q)`.
    pub fn gravity_vector(&self, q: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(q, "gravity_vector q")?;
        let p = self.dof();
        let jacs = self.com_jacobians(q);
        let mut g = DVector::zeros(p);
        for k in 0..p {
            // dU/dq with U = sum_k m_k * gravity * y_com_k
            for i in 0..p {
                g[i] += self.masses[k] * self.gravity * jacs[k][(1, i)];
            }
        }
        Ok(g)
    }

    /// End-effector position.
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Vector2<f64>, ModelError> {
        self.check_dim(q, "forward_kinematics q")?;
        let th = self.cumulative_angles(q);
        let mut x = Vector2::zeros();
        for (k, &t) in th.iter().enumerate() {
            let (s, c) = t.sin_cos();
            x[0] += self.lengths[k] * c;
            x[1] += self.lengths[k] * s;
        }
        Ok(x)
    }

    /// Task Jacobian `J(q)`, 2 x dof, with `xdot = J qdot`.
    pub fn jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        self.check_dim(q, "jacobian q")?;
        let p = self.dof();
        let th = self.cumulative_angles(q);
        let mut j = DMatrix::zeros(2, p);
        for k in 0..p {
            let (s, c) = th[k].sin_cos();
            for i in 0..=k {
                j[(0, i)] += -self.lengths[k] * s;
                j[(1, i)] += self.lengths[k] * c;
            }
        }
        Ok(j)
    }

    /// Time derivative of the task Jacobian along a trajectory.
    pub fn jacobian_dot(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DMatrix<f64>, ModelError> {
        self.check_dim(q, "jacobian_dot q")?;
        self.check_dim(qdot, "jacobian_dot qdot")?;
        let p = self.dof();
        let th = self.cumulative_angles(q);
        // link k's absolute angular rate
        let mut thdot = vec![0.0; p];
        let mut acc = 0.0;
        for k in 0..p {
            acc += qdot[k];
            thdot[k] = acc;
        }
        let mut jd = DMatrix::zeros(2, p);
        for k in 0..p {
            let (s, c) = th[k].sin_cos();
            for i in 0..=k {
                jd[(0, i)] += -self.lengths[k] * c * thdot[k];
                jd[(1, i)] += -self.lengths[k] * s * thdot[k];
            }
        }
        Ok(jd)
    }

    /// Smallest singular value of `J(q)`.
    pub fn min_singular_value(&self, q: &DVector<f64>) -> Result<f64, ModelError> {
        let j = self.jacobian(q)?;
        Ok(min_singular_value_2xp(&j))
    }

    /// Task-consistent inverse of the Jacobian: the plain inverse for 2-joint
    /// arms, the Moore-Penrose pseudoinverse `J^T (J J^T)^-1` for 3-joint
    /// arms. Errors when `J` is within `singularity_tol` of losing rank.
    pub fn j_sharp(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        let j = self.jacobian(q)?;
        self.j_sharp_of(&j)
    }

    fn j_sharp_of(&self, j: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
        let sigma_min = min_singular_value_2xp(j);
        if sigma_min < self.singularity_tol {
            return Err(ModelError::SingularJacobian {
                sigma_min,
                tol: self.singularity_tol,
            });
        }
        Ok(pinv_2xp(j))
    }

    /// Null-space projector `P = I - J# J`.
    ///
    /// For 2-joint arms the projector vanishes identically, and the exact
    /// zero matrix is returned rather than a numerically tiny one.
    pub fn null_projector(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        let p = self.dof();
        if p == 2 {
            // still surface singularity, callers rely on the error
            let _ = self.j_sharp(q)?;
            return Ok(DMatrix::zeros(2, 2));
        }
        let j = self.jacobian(q)?;
        let js = self.j_sharp_of(&j)?;
        Ok(DMatrix::identity(p, p) - js * j)
    }

    /// Time derivative of `J#` along a trajectory.
    pub fn j_sharp_dot(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DMatrix<f64>, ModelError> {
        let j = self.jacobian(q)?;
        let jd = self.jacobian_dot(q, qdot)?;
        let js = self.j_sharp_of(&j)?;
        if self.dof() == 2 {
            // d/dt J^-1 = -J^-1 Jdot J^-1
            return Ok(-(&js * jd * &js));
        }
        // For J# = J^T M with M = (J J^T)^-1:
        // d/dt J# = Jdot^T M + J^T Mdot,  Mdot = -M (Jdot J^T + J Jdot^T) M
        let m = (&j * j.transpose())
            .try_inverse()
            .ok_or(ModelError::SingularJacobian {
                sigma_min: min_singular_value_2xp(&j),
                tol: self.singularity_tol,
            })?;
        let s = &jd * j.transpose() + &j * jd.transpose();
        let mdot = -(&m * s * &m);
        Ok(jd.transpose() * &m + j.transpose() * mdot)
    }

    /// Convenience bundle for controller evaluation: `J`, `Jdot`, `J#`, and
    /// the null projector at one configuration, computed without repeating
    /// the trig work.
    pub fn kinematics_bundle(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<KinematicsBundle, ModelError> {
        let p = self.dof();
        let x = self.forward_kinematics(q)?;
        let j = self.jacobian(q)?;
        let jdot = self.jacobian_dot(q, qdot)?;
        let j_sharp = self.j_sharp_of(&j)?;
        let projector = if p == 2 {
            DMatrix::zeros(2, 2)
        } else {
            DMatrix::identity(p, p) - &j_sharp * &j
        };
        let j_sharp_dot = if p == 2 {
            -(&j_sharp * &jdot * &j_sharp)
        } else {
            let m = (&j * j.transpose())
                .try_inverse()
                .ok_or(ModelError::SingularJacobian {
                    sigma_min: min_singular_value_2xp(&j),
                    tol: self.singularity_tol,
                })?;
            let s = &jdot * j.transpose() + &j * jdot.transpose();
            let mdot = -(&m * s * &m);
            jdot.transpose() * &m + j.transpose() * mdot
        };
        Ok(KinematicsBundle {
            x,
            xdot: &j * qdot,
            j,
            jdot,
            j_sharp,
            j_sharp_dot,
            projector,
        })
    }
}

/// Kinematic quantities of one arm at one instant.
pub struct KinematicsBundle {
    pub x: Vector2<f64>,
    pub xdot: DVector<f64>,
    pub j: DMatrix<f64>,
    pub jdot: DMatrix<f64>,
    pub j_sharp: DMatrix<f64>,
    pub j_sharp_dot: DMatrix<f64>,
    pub projector: DMatrix<f64>,
}

/// Smallest singular value of a 2 x p matrix via the eigenvalues of `A A^T`.
pub fn min_singular_value_2xp(a: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.nrows(), 2);
    let g = a * a.transpose(); // 2x2, symmetric PSD
    let tr = g[(0, 0)] + g[(1, 1)];
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let lam_min = 0.5 * (tr - disc);
    lam_min.max(0.0).sqrt()
}

/// Right inverse of a full-rank 2 x p matrix: the plain inverse when p = 2,
/// `A^T (A A^T)^-1` when p > 2. Callers must check conditioning first.
pub fn pinv_2xp(a: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), 2);
    if a.ncols() == 2 {
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let mut inv = DMatrix::zeros(2, 2);
        inv[(0, 0)] = a[(1, 1)] / det;
        inv[(0, 1)] = -a[(0, 1)] / det;
        inv[(1, 0)] = -a[(1, 0)] / det;
        inv[(1, 1)] = a[(0, 0)] / det;
        return inv;
    }
    let g = a * a.transpose();
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let mut ginv = DMatrix::zeros(2, 2);
    ginv[(0, 0)] = g[(1, 1)] / det;
    ginv[(0, 1)] = -g[(0, 1)] / det;
    ginv[(1, 0)] = -g[(1, 0)] / det;
    ginv[(1, 1)] = g[(0, 0)] / det;
    a.transpose() * ginv
}
