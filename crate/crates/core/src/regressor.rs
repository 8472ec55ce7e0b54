//! Lumped-parameter form of the chain dynamics.
//!
//! The equations of motion are linear in a fixed set of lumped parameters
//! theta, which is what makes the adaptive law possible: for any vectors
//! `y` (velocity slot) and `x` (acceleration slot),
//!
//! ```text
//! H(q) x + C(q, qd) y + g(q) = Y(q, qd, y, x) theta
//! ```
//!
//! The basis comes from writing the kinetic energy in cumulative link angles
//! `theta_k = q_1 + ... + q_k`, where it has constant diagonal coefficients
//! `A_k`, pairwise couplings `B_ab cos(theta_b - theta_a)`, and gravity
//! weights `G_k`:
//!
//! * `A_k = I_k + m_k r_k^2 + l_k^2 * (sum of masses beyond link k)`
//! * `B_ab = l_a * (m_b r_b + l_b * (sum of masses beyond link b))`, a < b
//! * `G_k = m_k r_k + l_k * (sum of masses beyond link k)`
//!
//! ordered `[A_1..A_p, B_12, (B_13, B_23), G_1..G_p]`: 5 parameters for a
//! 2-link chain, 9 for a 3-link chain. Gravity scale is part of the regressor,
//! not the parameters, so one parameter vector serves any gravity setting.
//!
//! This module deliberately shares no code with the summation-based dynamics
//! in [`crate::arm`]; the two routes validate each other in tests.

use nalgebra::{DMatrix, DVector};

use crate::arm::ManipulatorModel;
use crate::error::ModelError;

/// Number of lumped parameters for a chain with `dof` joints.
pub fn theta_dim(dof: usize) -> usize {
    // A_k: dof, B_ab: dof*(dof-1)/2, G_k: dof
    2 * dof + dof * (dof - 1) / 2
}

/// Maps physical link parameters to the lumped vector described above.
pub fn theta_from_physical(
    masses: &[f64],
    lengths: &[f64],
    com_offsets: &[f64],
    inertias: &[f64],
) -> DVector<f64> {
    let p = masses.len();
    let tail_mass = |k: usize| -> f64 { masses[k + 1..].iter().sum() };
    let mut theta = Vec::with_capacity(theta_dim(p));
    for k in 0..p {
        theta.push(
            inertias[k] + masses[k] * com_offsets[k].powi(2) + lengths[k].powi(2) * tail_mass(k),
        );
    }
    for a in 0..p {
        for b in (a + 1)..p {
            theta.push(lengths[a] * (masses[b] * com_offsets[b] + lengths[b] * tail_mass(b)));
        }
    }
    for k in 0..p {
        theta.push(masses[k] * com_offsets[k] + lengths[k] * tail_mass(k));
    }
    DVector::from_vec(theta)
}

/// Regressor matrix `Y(q, qd, y, x)` of the identity above, `dof x theta_dim`.
///
/// Depends only on the arm's joint count and gravity scale, never on its
/// masses or inertias. `y` multiplies the Coriolis matrix, `x` the inertia
/// matrix; passing `y = qd, x = qdd` recovers the equations of motion.
pub fn regressor(
    model: &ManipulatorModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    y: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>, ModelError> {
    let p = model.dof();
    for (what, v) in [
        ("regressor q", q),
        ("regressor qdot", qdot),
        ("regressor y", y),
        ("regressor x", x),
    ] {
        if v.len() != p {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: p,
                got: v.len(),
            });
        }
    }

    // cumulative angles and selector vectors w_k (ones in the first k+1 slots)
    let mut th = vec![0.0; p];
    let mut acc = 0.0;
    for k in 0..p {
        acc += q[k];
        th[k] = acc;
    }
    let w =
        |k: usize| -> DVector<f64> { DVector::from_fn(p, |i, _| if i <= k { 1.0 } else { 0.0 }) };

    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(theta_dim(p));

    // A_k columns: H contribution w_k w_k' only
    for k in 0..p {
        let wk = w(k);
        let wx = wk.dot(x);
        cols.push(&wk * wx);
    }

    // B_ab columns: H part cos(d) S x, Coriolis part from the Christoffel
    // symbols of cos(d) S with d = theta_b - theta_a and S = w_a w_b' + w_b w_a'
    for a in 0..p {
        for b in (a + 1)..p {
            let wa = w(a);
            let wb = w(b);
            let s = &wa * wb.transpose() + &wb * wa.transpose();
            let d = th[b] - th[a];
            let (sin_d, cos_d) = d.sin_cos();
            // chi selects the joints between a and b (exclusive, inclusive)
            let chi = &wb - &wa;
            let v = qdot.dot(&chi);
            let s_y = &s * y;
            let s_qd = &s * qdot;
            let col = cos_d * (&s * x)
                - 0.5 * sin_d * (v * &s_y + chi.dot(y) * &s_qd - s_qd.dot(y) * &chi);
            cols.push(col);
        }
    }

    // G_k columns: gravity only
    for k in 0..p {
        cols.push(model.gravity() * th[k].cos() * w(k));
    }

    Ok(DMatrix::from_columns(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::STANDARD_GRAVITY;
    use crate::rng::UniformRng;
    use approx::assert_abs_diff_eq;

    fn benchmark_models() -> Vec<ManipulatorModel> {
        vec![
            ManipulatorModel::new(
                vec![0.8, 0.6],
                vec![1.4, 0.9],
                vec![0.8, 0.45],
                vec![6.0, 3.0],
                STANDARD_GRAVITY,
            )
            .unwrap(),
            ManipulatorModel::new(
                vec![0.5, 0.8],
                vec![1.1, 1.3],
                vec![0.4, 0.6],
                vec![5.0, 3.0],
                STANDARD_GRAVITY,
            )
            .unwrap(),
            ManipulatorModel::new(
                vec![0.8, 1.2, 1.4],
                vec![0.8, 1.1, 1.4],
                vec![0.4, 0.5, 0.7],
                vec![4.0, 6.0, 5.0],
                STANDARD_GRAVITY,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn theta_hand_values() {
        // 2-link: [A1, A2, B12, G1, G2]
        let t = theta_from_physical(&[0.8, 0.6], &[1.4, 0.9], &[0.8, 0.45], &[6.0, 3.0]);
        let expected = [7.688, 3.1215, 0.378, 1.48, 0.27];
        for (a, b) in t.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        // 3-link: [A1, A2, A3, B12, B13, B23, G1, G2, G3]
        let t = theta_from_physical(
            &[0.8, 1.2, 1.4],
            &[0.8, 1.1, 1.4],
            &[0.4, 0.5, 0.7],
            &[4.0, 6.0, 5.0],
        );
        let expected = [5.792, 7.994, 5.686, 1.712, 0.784, 1.078, 2.4, 2.14, 0.98];
        for (a, b) in t.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_against_assembled_dynamics() {
        // the central cross-check: Y theta == H x + C y + g with H, C, g from
        // the independent summation route
        let mut rng = UniformRng::seed_from_u64(20);
        for model in benchmark_models() {
            let p = model.dof();
            for _ in 0..300 {
                let rv = |rng: &mut UniformRng| DVector::from_fn(p, |_, _| rng.uniform(-3.0, 3.0));
                let q = rv(&mut rng);
                let qd = rv(&mut rng);
                let y = rv(&mut rng);
                let x = rv(&mut rng);
                let lhs = regressor(&model, &q, &qd, &y, &x).unwrap() * model.theta_true();
                let rhs = model.inertia_matrix(&q).unwrap() * &x
                    + model.coriolis_matrix(&q, &qd).unwrap() * &y
                    + model.gravity_vector(&q).unwrap();
                assert_abs_diff_eq!(&lhs, &rhs, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zero_slots_and_zero_gravity_give_zero() {
        let model = ManipulatorModel::new(
            vec![0.8, 1.2, 1.4],
            vec![0.8, 1.1, 1.4],
            vec![0.4, 0.5, 0.7],
            vec![4.0, 6.0, 5.0],
            0.0,
        )
        .unwrap();
        let mut rng = UniformRng::seed_from_u64(21);
        let q = DVector::from_fn(3, |_, _| rng.uniform(-3.0, 3.0));
        let qd = DVector::from_fn(3, |_, _| rng.uniform(-3.0, 3.0));
        let z = DVector::zeros(3);
        let yt = regressor(&model, &q, &qd, &z, &z).unwrap() * model.theta_true();
        assert_eq!(yt.norm(), 0.0);
    }

    #[test]
    fn linear_in_theta() {
        let model = &benchmark_models()[0];
        let mut rng = UniformRng::seed_from_u64(22);
        let rv = |rng: &mut UniformRng| DVector::from_fn(2, |_, _| rng.uniform(-2.0, 2.0));
        let q = rv(&mut rng);
        let qd = rv(&mut rng);
        let yv = rv(&mut rng);
        let x = rv(&mut rng);
        let ymat = regressor(model, &q, &qd, &yv, &x).unwrap();
        let t1 = DVector::from_fn(5, |_, _| rng.uniform(0.0, 5.0));
        let t2 = DVector::from_fn(5, |_, _| rng.uniform(0.0, 5.0));
        let lhs = &ymat * (2.0 * &t1 + 3.0 * &t2);
        let rhs = 2.0 * (&ymat * t1) + 3.0 * (&ymat * t2);
        assert_abs_diff_eq!(&lhs, &rhs, epsilon = 1e-12);
    }

    #[test]
    fn dims_and_errors() {
        let model = &benchmark_models()[2];
        assert_eq!(theta_dim(2), 5);
        assert_eq!(theta_dim(3), 9);
        assert_eq!(model.theta_true().len(), 9);
        let q = DVector::zeros(3);
        let bad = DVector::zeros(2);
        assert!(regressor(model, &q, &q, &q, &bad).is_err());
    }
}
