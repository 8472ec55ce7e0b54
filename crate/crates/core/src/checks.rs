//! Self-verification suite: every structural property the library relies on,
//! checked against independent oracles at runtime.
//!
//! Each check recomputes its target a second way (finite differences, brute
//! force set closure, frozen reference numbers) rather than trusting the
//! implementation under test. The `verify` subcommand prints one line per
//! check and fails if any property does not hold.

use nalgebra::{DMatrix, DVector};

use crate::arm::ManipulatorModel;
use crate::dcea::{self, EstimatorConfig, EstimatorState, Signum, ESTIMATE_DIM};
use crate::graph::Topology;
use crate::regressor;
use crate::rng::UniformRng;
use crate::trace::SimTrace;

/// Outcome of one verification property.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn bound(name: &'static str, worst: f64, tol: f64, context: String) -> Self {
        CheckResult {
            name,
            passed: worst < tol,
            detail: format!("{context}, worst {worst:.3e}, tolerance {tol:.1e}"),
        }
    }
}

/// Number of random joint states drawn per arm and per property.
const STATES_PER_ARM: usize = 300;

fn benchmark_models() -> Result<Vec<ManipulatorModel>, String> {
    let text = include_str!("../scenarios/seven_arm.toml");
    let loaded =
        crate::scenario::parse_scenario_str(text, "seven_arm").map_err(|e| e.to_string())?;
    Ok(loaded.config.arms.into_iter().map(|a| a.model).collect())
}

fn random_vec(rng: &mut UniformRng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.uniform(lo, hi))
}

/// Draws a joint state away from the Jacobian's singular set so that
/// pseudoinverse residuals measure algebra, not conditioning.
fn well_conditioned_state(
    model: &ManipulatorModel,
    rng: &mut UniformRng,
) -> (DVector<f64>, DVector<f64>) {
    loop {
        let q = random_vec(
            rng,
            model.dof(),
            -std::f64::consts::PI,
            std::f64::consts::PI,
        );
        if model.min_singular_value(&q).unwrap_or(0.0) > 1e-2 {
            let qdot = random_vec(rng, model.dof(), -3.0, 3.0);
            return (q, qdot);
        }
    }
}

fn check_inertia_positive(models: &[ManipulatorModel], rng: &mut UniformRng) -> CheckResult {
    let mut worst = f64::INFINITY;
    for model in models {
        for _ in 0..STATES_PER_ARM {
            let q = random_vec(
                rng,
                model.dof(),
                -std::f64::consts::PI,
                std::f64::consts::PI,
            );
            let h = model.inertia_matrix(&q).expect("dimensions are fixed");
            let mut z = random_vec(rng, model.dof(), -2.0, 2.0);
            if z.norm() < 1e-6 {
                z[0] = 1.0;
            }
            z /= z.norm();
            worst = worst.min((z.transpose() * &h * &z)[(0, 0)]);
        }
    }
    CheckResult {
        name: "inertia_positive_definite",
        passed: worst > 0.0,
        detail: format!(
            "{} arms x {STATES_PER_ARM} states, min normalized quadratic form {worst:.3e}",
            models.len()
        ),
    }
}

fn check_power_balance(models: &[ManipulatorModel], rng: &mut UniformRng) -> CheckResult {
    let mut worst = 0.0f64;
    for model in models {
        for _ in 0..STATES_PER_ARM {
            let q = random_vec(
                rng,
                model.dof(),
                -std::f64::consts::PI,
                std::f64::consts::PI,
            );
            let qdot = random_vec(rng, model.dof(), -3.0, 3.0);
            let hdot = model.inertia_matrix_dot(&q, &qdot).expect("fixed dims");
            let c = model.coriolis_matrix(&q, &qdot).expect("fixed dims");
            let z = random_vec(rng, model.dof(), -2.0, 2.0);
            let skew = &hdot - 2.0 * &c;
            worst = worst.max((z.transpose() * skew * &z)[(0, 0)].abs());
        }
    }
    CheckResult::bound(
        "power_balance_skew_symmetry",
        worst,
        1e-9,
        format!("{} arms x {STATES_PER_ARM} states", models.len()),
    )
}

fn check_regressor(models: &[ManipulatorModel], rng: &mut UniformRng) -> CheckResult {
    let mut worst = 0.0f64;
    for model in models {
        for _ in 0..STATES_PER_ARM {
            let p = model.dof();
            let q = random_vec(rng, p, -std::f64::consts::PI, std::f64::consts::PI);
            let qdot = random_vec(rng, p, -3.0, 3.0);
            let y = random_vec(rng, p, -2.0, 2.0);
            let x = random_vec(rng, p, -2.0, 2.0);
            let yy = regressor::regressor(model, &q, &qdot, &y, &x).expect("fixed dims");
            let lhs = yy * model.theta_true();
            let rhs = model.inertia_matrix(&q).expect("fixed dims") * &x
                + model.coriolis_matrix(&q, &qdot).expect("fixed dims") * &y
                + model.gravity_vector(&q).expect("fixed dims");
            worst = worst.max((lhs - rhs).norm());
        }
    }
    CheckResult::bound(
        "regressor_matches_dynamics",
        worst,
        1e-9,
        format!("{} arms x {STATES_PER_ARM} states", models.len()),
    )
}

fn check_null_projector(models: &[ManipulatorModel], rng: &mut UniformRng) -> CheckResult {
    let mut worst = 0.0f64;
    for model in models {
        for _ in 0..STATES_PER_ARM {
            let (q, _) = well_conditioned_state(model, rng);
            let j = model.jacobian(&q).expect("fixed dims");
            let p = model.null_projector(&q).expect("well conditioned");
            worst = worst.max((&p * &p - &p).norm());
            worst = worst.max((&j * &p).norm());
            worst = worst.max((&p - p.transpose()).norm());
        }
    }
    CheckResult::bound(
        "null_projector_idempotent_and_annihilated",
        worst,
        1e-10,
        format!("{} arms x {STATES_PER_ARM} states", models.len()),
    )
}

fn check_pseudoinverse(models: &[ManipulatorModel], rng: &mut UniformRng) -> CheckResult {
    let mut worst = 0.0f64;
    for model in models {
        for _ in 0..STATES_PER_ARM {
            let (q, _) = well_conditioned_state(model, rng);
            let j = model.jacobian(&q).expect("fixed dims");
            let js = model.j_sharp(&q).expect("well conditioned");
            worst = worst.max((&j * &js * &j - &j).norm());
            worst = worst.max((&js * &j * &js - &js).norm());
            let jjs = &j * &js;
            worst = worst.max((&jjs - jjs.transpose()).norm());
            let jsj = &js * &j;
            worst = worst.max((&jsj - jsj.transpose()).norm());
        }
    }
    CheckResult::bound(
        "pseudoinverse_conditions",
        worst,
        1e-10,
        format!("{} arms x {STATES_PER_ARM} states", models.len()),
    )
}

fn check_analytic_derivatives(models: &[ManipulatorModel], rng: &mut UniformRng) -> CheckResult {
    let mut worst = 0.0f64;
    let h = 1e-6;
    let samples = STATES_PER_ARM / 3;
    // residuals are normalized by the derivative magnitude so that a large,
    // fast-varying pseudoinverse does not mask agreement on the leading digits
    for model in models {
        for _ in 0..samples {
            let (q, qdot) = well_conditioned_state(model, rng);
            let ahead = &q + h * &qdot;
            let behind = &q - h * &qdot;
            // matrices analytic in q, differentiated along the flow q(t)
            let jd = model.jacobian_dot(&q, &qdot).expect("fixed dims");
            let fd = (model.jacobian(&ahead).expect("fixed dims")
                - model.jacobian(&behind).expect("fixed dims"))
                / (2.0 * h);
            worst = worst.max((&jd - &fd).norm() / (1.0 + jd.norm()));
            let hd = model.inertia_matrix_dot(&q, &qdot).expect("fixed dims");
            let fd = (model.inertia_matrix(&ahead).expect("fixed dims")
                - model.inertia_matrix(&behind).expect("fixed dims"))
                / (2.0 * h);
            worst = worst.max((&hd - &fd).norm() / (1.0 + hd.norm()));
            // the pseudoinverse derivative amplifies finite-difference noise
            // like 1/sigma_min^3, so only sample it well away from singularity
            if model.min_singular_value(&q).unwrap_or(0.0) > 0.3 {
                let jsd = model.j_sharp_dot(&q, &qdot).expect("well conditioned");
                let fd = (model.j_sharp(&ahead).expect("checked")
                    - model.j_sharp(&behind).expect("checked"))
                    / (2.0 * h);
                worst = worst.max((&jsd - &fd).norm() / (1.0 + jsd.norm()));
            }
        }
    }
    CheckResult::bound(
        "analytic_derivatives_match_finite_differences",
        worst,
        1e-5,
        format!(
            "{} arms x {samples} states, step {h:.0e}, relative residuals",
            models.len()
        ),
    )
}

/// Brute-force closure: starting from `seeds`, add any node that receives an
/// edge from the current set, until the set stops growing.
fn closure(adjacency: &DMatrix<f64>, seeds: u32, n: usize) -> u32 {
    let mut set = seeds;
    loop {
        let before = set;
        for i in 0..n {
            if set & (1 << i) != 0 {
                continue;
            }
            for j in 0..n {
                if set & (1 << j) != 0 && adjacency[(i, j)] > 0.0 {
                    set |= 1 << i;
                    break;
                }
            }
        }
        if set == before {
            return set;
        }
    }
}

fn check_reachability_oracle() -> CheckResult {
    let mut cases = 0usize;
    for n in 1..=4usize {
        let off_diag = n * n - n;
        for mask in 0u32..(1 << off_diag) {
            let mut adjacency = DMatrix::zeros(n, n);
            let mut bit = 0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        if mask & (1 << bit) != 0 {
                            adjacency[(i, j)] = 1.0;
                        }
                        bit += 1;
                    }
                }
            }
            let full = (1u32 << n) - 1;
            // spanning tree: some root reaches everything through the edges
            let expect_tree = (0..n).any(|r| closure(&adjacency, 1 << r, n) == full);
            for pin_mask in 0u32..(1 << n) {
                let pinning =
                    DVector::from_fn(n, |k, _| if pin_mask & (1 << k) != 0 { 1.0 } else { 0.0 });
                let topo = Topology::new(adjacency.clone(), pinning)
                    .expect("constructed adjacency is valid");
                let expect_reach = pin_mask != 0 && closure(&adjacency, pin_mask, n) == full;
                if topo.leader_reachable() != expect_reach
                    || topo.spanning_tree_exists() != expect_tree
                {
                    return CheckResult {
                        name: "reachability_matches_brute_force",
                        passed: false,
                        detail: format!(
                            "disagreement at n={n}, adjacency mask {mask}, pinning mask {pin_mask}"
                        ),
                    };
                }
                cases += 1;
            }
        }
    }
    CheckResult {
        name: "reachability_matches_brute_force",
        passed: true,
        detail: format!("{cases} digraph/pinning combinations, n <= 4, exhaustive"),
    }
}

fn check_reference_laplacian() -> CheckResult {
    let text = include_str!("../scenarios/seven_arm.toml");
    let loaded = match crate::scenario::parse_scenario_str(text, "seven_arm") {
        Ok(l) => l,
        Err(e) => {
            return CheckResult {
                name: "reference_laplacian",
                passed: false,
                detail: format!("scenario failed to parse: {e}"),
            }
        }
    };
    let topo = &loaded.config.topology.segments()[0].1;
    let mut expected = DMatrix::zeros(7, 7);
    // receivers 2 and 4 each average nodes 1 and 3; receiver 6 follows 5
    for (receiver, sources) in [(1usize, vec![0usize, 2]), (3, vec![0, 2]), (5, vec![4])] {
        expected[(receiver, receiver)] = sources.len() as f64;
        for s in sources {
            expected[(receiver, s)] = -1.0;
        }
    }
    let got = topo.laplacian();
    let diff = (&got - &expected).abs().max();
    let pin_ok = topo.pinning == DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    CheckResult {
        name: "reference_laplacian",
        passed: diff == 0.0 && pin_ok,
        detail: format!(
            "7-node reference graph, max Laplacian deviation {diff:.1e}, pinning {}",
            if pin_ok { "matches" } else { "differs" }
        ),
    }
}

fn check_estimator_locality(rng: &mut UniformRng) -> CheckResult {
    let n = 6;
    let config = EstimatorConfig {
        beta: [4.0, 7.0, 21.0],
        signum: Signum::Exact,
    };
    let leader = DVector::from_fn(ESTIMATE_DIM, |k, _| 0.1 * k as f64);
    let mut trials = 0usize;
    for round in 0..50 {
        let mut adjacency = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.uniform(0.0, 1.0) < 0.3 {
                    adjacency[(i, j)] = rng.uniform(0.5, 2.0);
                }
            }
        }
        let pinning = DVector::from_fn(n, |k, _| if (k + round) % 3 == 0 { 1.0 } else { 0.0 });
        let topo = Topology::new(adjacency, pinning).expect("valid by construction");
        let states: Vec<EstimatorState> = (0..n)
            .map(|_| EstimatorState::new(random_vec(rng, ESTIMATE_DIM, -5.0, 5.0)).unwrap())
            .collect();
        for i in 0..n {
            let baseline = dcea::estimator_rate(i, &states, &topo, Some(&leader), &config)
                .expect("leader supplied");
            let neighbors: Vec<usize> = topo.in_neighbors(i).map(|(j, _)| j).collect();
            let mut perturbed = states.clone();
            for (j, state) in perturbed.iter_mut().enumerate() {
                if j != i && !neighbors.contains(&j) {
                    state.zeta += random_vec(rng, ESTIMATE_DIM, -10.0, 10.0);
                }
            }
            let after = dcea::estimator_rate(i, &perturbed, &topo, Some(&leader), &config)
                .expect("leader supplied");
            if baseline != after {
                return CheckResult {
                    name: "estimator_uses_only_neighbors",
                    passed: false,
                    detail: format!("node {} reacted to a non-neighbor state change", i + 1),
                };
            }
            trials += 1;
        }
    }
    CheckResult {
        name: "estimator_uses_only_neighbors",
        passed: true,
        detail: format!("{trials} node/topology trials, rates bitwise unchanged"),
    }
}

fn check_settle_bound_reference() -> CheckResult {
    let text = include_str!("../scenarios/seven_arm.toml");
    let Ok(loaded) = crate::scenario::parse_scenario_str(text, "seven_arm") else {
        return CheckResult {
            name: "settle_bound_reference",
            passed: false,
            detail: "reference scenario failed to parse".into(),
        };
    };
    let leader = loaded
        .config
        .leader
        .expect("reference scenario has a leader");
    let sups = leader.derivative_sups();
    let got = dcea::settle_time_bound(&[5.0, 5.0, 5.0], &loaded.config.estimator.beta, &sups, 0.0);
    let expected = 2.421075599305165;
    match got {
        Ok(v) => CheckResult {
            name: "settle_bound_reference",
            passed: v == expected,
            detail: format!("worst errors 5 per block, got {v:.15}, expected {expected:.15}"),
        },
        Err(e) => CheckResult {
            name: "settle_bound_reference",
            passed: false,
            detail: format!("bound not computable: {e}"),
        },
    }
}

fn check_trace_round_trip(rng: &mut UniformRng) -> CheckResult {
    let columns: Vec<String> = (0..8).map(|k| format!("c{k}")).collect();
    let mut trace = SimTrace::new(columns);
    for r in 0..64 {
        let mut row = Vec::with_capacity(8);
        for c in 0..8 {
            let v = match (r + c) % 5 {
                0 => 0.0,
                1 => rng.uniform(-1.0, 1.0) * 1e-300,
                2 => rng.uniform(-1.0, 1.0) * 1e300,
                3 => -rng.uniform(0.0, 1.0),
                _ => rng.uniform(-1000.0, 1000.0),
            };
            row.push(v);
        }
        trace.push_row(row).expect("row width matches");
    }
    let text = trace.to_csv_string();
    let back = match SimTrace::from_csv_str(&text) {
        Ok(t) => t,
        Err(e) => {
            return CheckResult {
                name: "trace_csv_round_trip",
                passed: false,
                detail: format!("re-parse failed: {e}"),
            }
        }
    };
    let mut exact = back.columns() == trace.columns() && back.n_rows() == trace.n_rows();
    if exact {
        'rows: for r in 0..trace.n_rows() {
            for c in 0..trace.n_cols() {
                let (a, b) = (trace.value(r, c), back.value(r, c));
                if a.to_bits() != b.to_bits() {
                    exact = false;
                    break 'rows;
                }
            }
        }
    }
    CheckResult {
        name: "trace_csv_round_trip",
        passed: exact,
        detail: format!(
            "64 rows x 8 columns spanning 1e-300..1e300, {}",
            if exact {
                "bitwise identical"
            } else {
                "mismatch"
            }
        ),
    }
}

/// Runs every verification property with reproducible randomness.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let models = match benchmark_models() {
        Ok(m) => m,
        Err(e) => {
            return vec![CheckResult {
                name: "reference_scenario_parses",
                passed: false,
                detail: e,
            }]
        }
    };
    let mut rng = UniformRng::seed_from_u64(seed);
    vec![
        CheckResult {
            name: "reference_scenario_parses",
            passed: true,
            detail: format!("{} arms loaded", models.len()),
        },
        check_inertia_positive(&models, &mut rng),
        check_power_balance(&models, &mut rng),
        check_regressor(&models, &mut rng),
        check_null_projector(&models, &mut rng),
        check_pseudoinverse(&models, &mut rng),
        check_analytic_derivatives(&models, &mut rng),
        check_reachability_oracle(),
        check_reference_laplacian(),
        check_estimator_locality(&mut rng),
        check_settle_bound_reference(),
        check_trace_round_trip(&mut rng),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let results = run_all(7);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(results.len() >= 12);
    }

    #[test]
    fn checks_are_deterministic_for_a_seed() {
        let a = run_all(3);
        let b = run_all(3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.detail, y.detail);
        }
    }
}
