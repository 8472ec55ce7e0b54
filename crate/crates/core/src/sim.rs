//! Fixed-step, deterministic simulation of an arm network.
//!
//! The engine integrates every arm's rigid-body dynamics with semi-implicit
//! Euler at a substep `dt`, while the controller stack runs at a configurable
//! cadence. The scenario's `control_period` sets the trace sampling grid and
//! the disturbance hold time; [`UpdateCadence`] chooses whether estimator and
//! controller rates are recomputed every substep (the default) or computed at
//! the start of each control period and held, relay-style, across it.
//! Holding discontinuous switching terms across a long period produces large
//! limit cycles, so the held mode mainly serves cadence experiments.
//!
//! Determinism is a contract: a scenario and seed reproduce traces
//! bit-for-bit. All randomness flows through two counter-seeded streams, one
//! for initial conditions and one for disturbances, and the engine is
//! single-threaded with a fixed iteration order.

use nalgebra::DVector;

use crate::arm::{JointState, ManipulatorModel};
use crate::dcea::{
    self, ControlGains, ControlOutput, EstimatorConfig, EstimatorState, ESTIMATE_DIM,
};
use crate::error::{DceaError, ModelError, SimError};
use crate::graph::TopologySchedule;
use crate::leader::LeaderTrajectory;
use crate::regressor;
use crate::rng::UniformRng;
use crate::subtask::{self, Subtask};
use crate::trace::SimTrace;

/// Salt xored into the scenario seed for the disturbance stream, so initial
/// conditions and disturbances are independent for any given seed.
pub const DISTURBANCE_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// One arm: its physical model, controller gains, and null-space objective.
#[derive(Debug, Clone)]
pub struct ArmConfig {
    pub model: ManipulatorModel,
    pub gains: ControlGains,
    pub subtask: Subtask,
}

/// How often estimator and controller rates are recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateCadence {
    /// Recompute every integrator substep.
    #[default]
    Substep,
    /// Recompute at the start of each control period and hold in between.
    Tick,
}

/// Explicit initial conditions for one arm.
#[derive(Debug, Clone)]
pub struct ArmInit {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub zeta: DVector<f64>,
    pub theta_hat: DVector<f64>,
}

/// Where initial conditions come from.
///
/// Sampling order is part of the determinism contract: arms in index order,
/// and per arm all of `q`, then `qdot`, then `zeta`, then `theta_hat`,
/// each entry drawn uniformly from its range.
#[derive(Debug, Clone)]
pub enum InitSpec {
    Sampled {
        q_range: (f64, f64),
        qdot_range: (f64, f64),
        zeta_range: (f64, f64),
        theta_range: (f64, f64),
    },
    Explicit(Vec<ArmInit>),
}

/// A complete runnable scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub arms: Vec<ArmConfig>,
    pub topology: TopologySchedule,
    /// The reference trajectory. `None` runs the network leaderless, which
    /// requires every topology segment to have no pinned nodes.
    pub leader: Option<LeaderTrajectory>,
    pub estimator: EstimatorConfig,
    /// Total simulated time, s.
    pub duration: f64,
    /// Trace sampling period and disturbance hold time, s.
    pub control_period: f64,
    /// Integrator substep, s. Must divide `control_period`.
    pub dt: f64,
    pub cadence: UpdateCadence,
    /// Disturbance torques are drawn per joint, uniformly from
    /// `[-disturbance_max, disturbance_max]`, and held for one control
    /// period. Zero disables the disturbance stream entirely.
    pub disturbance_max: f64,
    pub seed: u64,
    pub init: InitSpec,
}

impl ScenarioConfig {
    /// Checks that the scenario is runnable. Returns human-readable warnings
    /// for legal but suspicious configurations; hard problems are errors.
    pub fn validate(&self) -> Result<Vec<String>, SimError> {
        let mut warnings = Vec::new();
        let n = self.arms.len();
        if n == 0 {
            return Err(SimError::BadConfig("scenario has no arms".into()));
        }
        if self.topology.n() != n {
            return Err(SimError::BadConfig(format!(
                "topology covers {} nodes but the scenario has {} arms",
                self.topology.n(),
                n
            )));
        }
        for (what, v) in [
            ("duration", self.duration),
            ("control_period", self.control_period),
            ("dt", self.dt),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SimError::BadConfig(format!(
                    "{what} must be finite and positive, got {v}"
                )));
            }
        }
        let spt = self.control_period / self.dt;
        if spt < 1.0 - 1e-9 || (spt - spt.round()).abs() > 1e-6 {
            return Err(SimError::BadConfig(format!(
                "control_period ({}) must be a whole multiple of dt ({})",
                self.control_period, self.dt
            )));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(SimError::BadConfig(format!(
                "duration ({}) must be a whole multiple of dt ({})",
                self.duration, self.dt
            )));
        }
        let ticks = self.duration / self.control_period;
        if (ticks - ticks.round()).abs() > 1e-6 {
            warnings.push(
                "duration is not a whole number of control periods; the trace ends at the last full period"
                    .into(),
            );
        }
        if !self.disturbance_max.is_finite() || self.disturbance_max < 0.0 {
            return Err(SimError::BadConfig(
                "disturbance_max must be finite and nonnegative".into(),
            ));
        }
        self.estimator.validate()?;
        for (i, arm) in self.arms.iter().enumerate() {
            let dof = arm.model.dof();
            let tdim = regressor::theta_dim(dof);
            for w in arm.gains.validate(dof, tdim)? {
                warnings.push(format!("arm {}: {w}", i + 1));
            }
            arm.subtask
                .validate(dof)
                .map_err(|e| SimError::BadConfig(format!("arm {}: {e}", i + 1)))?;
            if !arm.model.is_redundant() && arm.subtask != Subtask::None {
                warnings.push(format!(
                    "arm {}: subtask on a non-redundant arm has no effect",
                    i + 1
                ));
            }
            if self.disturbance_max > 0.0 {
                let min_kr = (0..dof)
                    .map(|k| arm.gains.k_r[(k, k)])
                    .fold(f64::INFINITY, f64::min);
                if min_kr <= self.disturbance_max {
                    warnings.push(format!(
                        "arm {}: switching gain k_r (min diagonal {min_kr}) does not exceed the disturbance bound {}; disturbance rejection is not guaranteed",
                        i + 1,
                        self.disturbance_max
                    ));
                }
            }
        }
        match &self.leader {
            None => {
                for (k, (_, topo)) in self.topology.segments().iter().enumerate() {
                    if topo.pinning.iter().any(|&b| b > 0.0) {
                        return Err(SimError::BadConfig(format!(
                            "topology segment {} pins nodes but the scenario has no reference trajectory",
                            k + 1
                        )));
                    }
                    if !topo.spanning_tree_exists() {
                        warnings.push(format!(
                            "topology segment {} has no spanning tree; leaderless consensus is not guaranteed",
                            k + 1
                        ));
                    }
                }
            }
            Some(leader) => {
                leader
                    .validate()
                    .map_err(|e| SimError::BadConfig(e.to_string()))?;
                let sups = leader.derivative_sups();
                for (k, (&beta, &sup)) in self.estimator.beta.iter().zip(sups.iter()).enumerate() {
                    if beta <= sup {
                        warnings.push(format!(
                            "estimator gain beta[{}] = {beta} does not dominate the reference derivative bound {sup}; finite-time settling is not guaranteed",
                            k + 1
                        ));
                    }
                }
                for (k, (_, topo)) in self.topology.segments().iter().enumerate() {
                    if !topo.leader_reachable() {
                        warnings.push(format!(
                            "topology segment {} does not connect every arm to the reference; estimates may not converge",
                            k + 1
                        ));
                    }
                }
            }
        }
        match &self.init {
            InitSpec::Sampled {
                q_range,
                qdot_range,
                zeta_range,
                theta_range,
            } => {
                for (what, (lo, hi)) in [
                    ("q_range", q_range),
                    ("qdot_range", qdot_range),
                    ("zeta_range", zeta_range),
                    ("theta_range", theta_range),
                ] {
                    if !lo.is_finite() || !hi.is_finite() || lo > hi {
                        return Err(SimError::BadConfig(format!(
                            "initial condition {what} is not a valid interval: [{lo}, {hi}]"
                        )));
                    }
                }
            }
            InitSpec::Explicit(inits) => {
                if inits.len() != n {
                    return Err(SimError::BadConfig(format!(
                        "explicit initial conditions cover {} arms, scenario has {}",
                        inits.len(),
                        n
                    )));
                }
                for (i, (init, arm)) in inits.iter().zip(&self.arms).enumerate() {
                    let dof = arm.model.dof();
                    let tdim = regressor::theta_dim(dof);
                    for (what, v, want) in [
                        ("q", &init.q, dof),
                        ("qdot", &init.qdot, dof),
                        ("zeta", &init.zeta, ESTIMATE_DIM),
                        ("theta_hat", &init.theta_hat, tdim),
                    ] {
                        if v.len() != want {
                            return Err(SimError::BadConfig(format!(
                                "arm {}: initial {what} has {} entries, expected {want}",
                                i + 1,
                                v.len()
                            )));
                        }
                        if v.iter().any(|x| !x.is_finite()) {
                            return Err(SimError::BadConfig(format!(
                                "arm {}: initial {what} has non-finite entries",
                                i + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(warnings)
    }

    fn substeps_per_tick(&self) -> usize {
        (self.control_period / self.dt).round() as usize
    }

    fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Column names of the trace this scenario produces, in order. The
    /// reference carries index 0 (`x0_x`, `v0_y`, ...), arms are one-based,
    /// joints and lumped parameters are suffixed `_1`, `_2`, ... and planar
    /// coordinates `_x`, `_y`.
    pub fn trace_columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string(), "segment".to_string()];
        if self.leader.is_some() {
            for name in ["x0", "v0", "a0"] {
                for c in ["x", "y"] {
                    cols.push(format!("{name}_{c}"));
                }
            }
        }
        for (i, arm) in self.arms.iter().enumerate() {
            let a = i + 1;
            let p = arm.model.dof();
            for j in 1..=p {
                cols.push(format!("q{a}_{j}"));
            }
            for j in 1..=p {
                cols.push(format!("qd{a}_{j}"));
            }
            for c in ["x", "y"] {
                cols.push(format!("x{a}_{c}"));
            }
            for c in ["x", "y"] {
                cols.push(format!("xd{a}_{c}"));
            }
            if self.leader.is_some() {
                cols.push(format!("e_norm{a}"));
                cols.push(format!("sigma{a}"));
            }
            for j in 1..=p {
                cols.push(format!("u{a}_{j}"));
            }
            for j in 1..=p {
                cols.push(format!("s{a}_{j}"));
            }
            for name in ["xhat", "vhat", "ahat"] {
                for c in ["x", "y"] {
                    cols.push(format!("{name}{a}_{c}"));
                }
            }
            for k in 1..=regressor::theta_dim(p) {
                cols.push(format!("th{a}_{k}"));
            }
            if arm.model.is_redundant() {
                for j in 1..=p {
                    cols.push(format!("es{a}_{j}"));
                }
                cols.push(format!("manip{a}"));
            }
        }
        cols
    }

    /// Initial conditions, either the explicit ones or freshly sampled from
    /// this scenario's seed.
    pub fn initial_conditions(&self) -> Vec<ArmInit> {
        match &self.init {
            InitSpec::Explicit(inits) => inits.clone(),
            InitSpec::Sampled {
                q_range,
                qdot_range,
                zeta_range,
                theta_range,
            } => {
                let mut rng = UniformRng::seed_from_u64(self.seed);
                self.arms
                    .iter()
                    .map(|arm| {
                        let p = arm.model.dof();
                        let draw = |rng: &mut UniformRng, n: usize, r: &(f64, f64)| {
                            DVector::from_fn(n, |_, _| rng.uniform(r.0, r.1))
                        };
                        ArmInit {
                            q: draw(&mut rng, p, q_range),
                            qdot: draw(&mut rng, p, qdot_range),
                            zeta: draw(&mut rng, ESTIMATE_DIM, zeta_range),
                            theta_hat: draw(&mut rng, regressor::theta_dim(p), theta_range),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Maps a controller failure to a simulation abort with run context.
fn control_error(err: DceaError, arm: usize, time: f64, state: &JointState) -> SimError {
    match err {
        DceaError::Model(ModelError::SingularJacobian { .. }) => SimError::SingularJacobian {
            arm: arm + 1,
            time,
            q: state.q.iter().copied().collect(),
        },
        other => SimError::Dcea(other),
    }
}

/// Runs a scenario to completion and returns the sampled trace.
///
/// The trace holds one row per control period, including both endpoints.
/// The run aborts with a descriptive error if any arm reaches a singular
/// configuration or any state stops being finite; no clamping or
/// regularization is applied.
pub fn run(config: &ScenarioConfig) -> Result<SimTrace, SimError> {
    config.validate()?;
    let n = config.arms.len();
    let dt = config.dt;
    let spt = config.substeps_per_tick();
    let n_steps = config.n_steps();

    let inits = config.initial_conditions();
    let mut joints: Vec<JointState> = inits
        .iter()
        .map(|i| JointState::new(i.q.clone(), i.qdot.clone()))
        .collect();
    let mut estimates: Vec<EstimatorState> = inits
        .iter()
        .map(|i| EstimatorState::new(i.zeta.clone()).map_err(SimError::Model))
        .collect::<Result<_, _>>()?;
    let mut theta_hats: Vec<DVector<f64>> = inits.iter().map(|i| i.theta_hat.clone()).collect();

    let mut disturbance_rng = UniformRng::seed_from_u64(config.seed ^ DISTURBANCE_STREAM_SALT);
    let mut disturbances: Vec<DVector<f64>> = config
        .arms
        .iter()
        .map(|a| DVector::zeros(a.model.dof()))
        .collect();

    let mut trace = SimTrace::new(config.trace_columns());
    let mut zeta_rates: Vec<DVector<f64>> = Vec::new();
    let mut controls: Vec<ControlOutput> = Vec::new();

    for step in 0..=n_steps {
        let t = step as f64 * dt;
        let tick_boundary = step % spt == 0;

        if tick_boundary || config.cadence == UpdateCadence::Substep {
            let (_, topology) = config.topology.active_at(t);
            let leader_stack = config.leader.as_ref().map(|l| l.stack(t));
            zeta_rates = (0..n)
                .map(|i| {
                    dcea::estimator_rate(
                        i,
                        &estimates,
                        topology,
                        leader_stack.as_ref(),
                        &config.estimator,
                    )
                })
                .collect::<Result<_, _>>()?;
            controls = config
                .arms
                .iter()
                .enumerate()
                .map(|(i, arm)| {
                    dcea::control_step(
                        &arm.model,
                        &arm.gains,
                        &arm.subtask,
                        &joints[i],
                        &estimates[i],
                        &theta_hats[i],
                        config.estimator.signum,
                    )
                    .map_err(|e| control_error(e, i, t, &joints[i]))
                })
                .collect::<Result<_, _>>()?;
            for (i, c) in controls.iter().enumerate() {
                if c.torque.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::NonfiniteState {
                        arm: i + 1,
                        time: t,
                        what: "torque",
                    });
                }
            }
        }

        if tick_boundary {
            let segment = config.topology.active_at(t).0;
            trace
                .push_row(record_row(
                    config,
                    &joints,
                    &estimates,
                    &theta_hats,
                    &controls,
                    t,
                    segment,
                )?)
                .expect("row width matches the schema by construction");
            if step < n_steps && config.disturbance_max > 0.0 {
                for d in &mut disturbances {
                    for v in d.iter_mut() {
                        *v = disturbance_rng
                            .uniform(-config.disturbance_max, config.disturbance_max);
                    }
                }
            }
        }

        if step == n_steps {
            break;
        }

        for i in 0..n {
            let model = &config.arms[i].model;
            let q = &joints[i].q;
            let qdot = &joints[i].qdot;
            let h = model.inertia_matrix(q)?;
            let c = model.coriolis_matrix(q, qdot)?;
            let g = model.gravity_vector(q)?;
            let rhs = &controls[i].torque + &disturbances[i] - c * qdot - g;
            let qddot = h
                .cholesky()
                .ok_or(SimError::Model(ModelError::NotPositiveDefinite))?
                .solve(&rhs);
            // semi-implicit: advance velocity first, then position with it
            joints[i].qdot += dt * qddot;
            let qdot_new = joints[i].qdot.clone();
            joints[i].q += dt * qdot_new;
            estimates[i].zeta += dt * &zeta_rates[i];
            theta_hats[i] += dt * &controls[i].theta_hat_rate;

            let t_next = t + dt;
            if joints[i]
                .q
                .iter()
                .chain(joints[i].qdot.iter())
                .any(|v| !v.is_finite())
            {
                return Err(SimError::NonfiniteState {
                    arm: i + 1,
                    time: t_next,
                    what: "joint state",
                });
            }
            if estimates[i].zeta.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonfiniteState {
                    arm: i + 1,
                    time: t_next,
                    what: "estimate",
                });
            }
            if theta_hats[i].iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonfiniteState {
                    arm: i + 1,
                    time: t_next,
                    what: "parameter estimate",
                });
            }
        }
    }

    Ok(trace)
}

/// Runs a scenario twice with identical seeds: once as configured and once
/// with every subtask removed. The pair isolates what the null-space
/// objectives contribute, since the runs share initial conditions and
/// disturbances exactly.
pub fn run_pair_subtask(config: &ScenarioConfig) -> Result<(SimTrace, SimTrace), SimError> {
    let with = run(config)?;
    let mut stripped = config.clone();
    for arm in &mut stripped.arms {
        arm.subtask = Subtask::None;
    }
    let without = run(&stripped)?;
    Ok((with, without))
}

fn record_row(
    config: &ScenarioConfig,
    joints: &[JointState],
    estimates: &[EstimatorState],
    theta_hats: &[DVector<f64>],
    controls: &[ControlOutput],
    t: f64,
    segment: usize,
) -> Result<Vec<f64>, SimError> {
    let mut row = Vec::new();
    row.push(t);
    row.push(segment as f64);
    if let Some(leader) = &config.leader {
        let x = leader.position(t);
        let v = leader.velocity(t);
        let a = leader.acceleration(t);
        row.extend([x.x, x.y, v.x, v.y, a.x, a.y]);
    }
    for i in 0..config.arms.len() {
        let c = &controls[i];
        row.extend(joints[i].q.iter());
        row.extend(joints[i].qdot.iter());
        row.extend([c.x.x, c.x.y, c.xdot.x, c.xdot.y]);
        if let Some(leader) = &config.leader {
            row.push((c.x - leader.position(t)).norm());
            let sigma = (&estimates[i].zeta - leader.stack(t)).amax();
            row.push(sigma);
        }
        row.extend(c.torque.iter());
        row.extend(c.s_hat.iter());
        row.extend(estimates[i].zeta.iter());
        row.extend(theta_hats[i].iter());
        let model = &config.arms[i].model;
        if model.is_redundant() {
            // null-space tracking error: the joint motion component invisible
            // to the end effector, relative to the requested null-space field
            let phi = config.arms[i].subtask.phi(model, &joints[i].q)?;
            let e_s = model.null_projector(&joints[i].q)? * (&joints[i].qdot - phi);
            row.extend(e_s.iter());
            row.push(subtask::manipulability(model, &joints[i].q)?);
        }
    }
    Ok(row)
}
