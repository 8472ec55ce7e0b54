//! Run metrics: settle times, tail-window tracking errors, subtask scores,
//! and a pass/fail verdict against declared thresholds.
//!
//! Everything here is a pure function of a finished trace plus the scenario
//! it came from. The report is renderable as aligned text (`Display`) and as
//! JSON (`serde_json` on [`RunReport`]), and each number is recomputable
//! from the raw CSV alone; a short reference script under `docs/` does
//! exactly that as an independent cross-check.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dcea;
use crate::error::TraceError;
use crate::sim::ScenarioConfig;
use crate::subtask::Subtask;
use crate::trace::SimTrace;

/// Acceptance thresholds. The defaults reflect the sgn-chattering floor of
/// the discretized estimator and torque laws at the shipped substep sizes;
/// scenario files may override any of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Estimator agreement band: max_i of the per-arm infinity-norm
    /// disagreement with the reference stack (or pairwise, leaderless).
    pub settle_tol: f64,
    /// Task-space position error bound over the tail window (m).
    pub position_tol: f64,
    /// Task-space velocity error bound over the tail window (m/s).
    pub velocity_tol: f64,
    /// Final miss allowed for a joint-target subtask (rad).
    pub joint_target_tol: f64,
    /// Null-space velocity error bound over the tail window (rad/s).
    pub null_space_tol: f64,
    /// Pairwise estimator disagreement bound, leaderless runs.
    pub pairwise_estimate_tol: f64,
    /// Pairwise end-effector disagreement bound over the tail, leaderless.
    pub pairwise_position_tol: f64,
    /// Fraction of the run treated as the tail window.
    pub tail_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            settle_tol: 0.02,
            position_tol: 0.02,
            velocity_tol: 0.05,
            joint_target_tol: 0.05,
            null_space_tol: 0.02,
            pairwise_estimate_tol: 0.02,
            pairwise_position_tol: 0.05,
            tail_fraction: 0.25,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), crate::error::ScenarioError> {
        let entries = [
            ("settle_tol", self.settle_tol),
            ("position_tol", self.position_tol),
            ("velocity_tol", self.velocity_tol),
            ("joint_target_tol", self.joint_target_tol),
            ("null_space_tol", self.null_space_tol),
            ("pairwise_estimate_tol", self.pairwise_estimate_tol),
            ("pairwise_position_tol", self.pairwise_position_tol),
        ];
        for (name, v) in entries {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::error::ScenarioError::Invalid(format!(
                    "threshold {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(crate::error::ScenarioError::Invalid(format!(
                "tail_fraction must lie in (0, 1), got {}",
                self.tail_fraction
            )));
        }
        Ok(())
    }
}

/// Per-arm slice of the report. Leader-relative entries are absent in
/// leaderless runs; subtask entries are absent where no subtask applies.
#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    /// One-based arm number.
    pub arm: usize,
    /// Max task-space position error over the tail window (m).
    pub tail_position_error: Option<f64>,
    /// Max task-space velocity error over the tail window (m/s).
    pub tail_velocity_error: Option<f64>,
    /// Position error at the final sample (m).
    pub final_position_error: Option<f64>,
    /// |q_j(end) - target| for a joint-target subtask (rad).
    pub joint_target_miss: Option<f64>,
    /// Max null-space velocity error over the tail (redundant arms, rad/s).
    pub tail_null_space_error: Option<f64>,
    /// Mean manipulability over the tail (redundant arms).
    pub tail_mean_manipulability: Option<f64>,
}

/// Aggregated metrics and verdict of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    /// Final trace time (s).
    pub duration: f64,
    /// Start of the tail window (s).
    pub tail_start: f64,
    /// Closed-form settle-time bound from the initial estimator errors, when
    /// a reference exists and the rate margins are positive.
    pub settle_bound: Option<f64>,
    /// First sampled time after which the estimator disagreement stays below
    /// `settle_tol` to the end of the run.
    pub observed_settle: Option<f64>,
    pub arms: Vec<ArmReport>,
    /// Worst tail position error across arms (m).
    pub max_tail_position_error: Option<f64>,
    /// Worst tail velocity error across arms (m/s).
    pub max_tail_velocity_error: Option<f64>,
    /// Leaderless: max over the tail of max pairwise estimator disagreement.
    pub pairwise_estimate_disagreement: Option<f64>,
    /// Leaderless: max over the tail of pairwise end-effector distance (m).
    pub pairwise_position_disagreement: Option<f64>,
    pub thresholds: Thresholds,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "-".to_string(),
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(
            f,
            "duration: {:.3} s   tail window: [{:.3}, {:.3}] s",
            self.duration, self.tail_start, self.duration
        )?;
        writeln!(
            f,
            "estimator settle: bound {}  observed {}  (tolerance {})",
            fmt_opt(self.settle_bound),
            fmt_opt(self.observed_settle),
            self.thresholds.settle_tol
        )?;
        if self.max_tail_position_error.is_some() {
            writeln!(
                f,
                "tracking tail: max position error {} m (tol {})  max velocity error {} m/s (tol {})",
                fmt_opt(self.max_tail_position_error),
                self.thresholds.position_tol,
                fmt_opt(self.max_tail_velocity_error),
                self.thresholds.velocity_tol
            )?;
        }
        if self.pairwise_estimate_disagreement.is_some() {
            writeln!(
                f,
                "leaderless tail: pairwise estimate disagreement {} (tol {})  pairwise position {} m (tol {})",
                fmt_opt(self.pairwise_estimate_disagreement),
                self.thresholds.pairwise_estimate_tol,
                fmt_opt(self.pairwise_position_disagreement),
                self.thresholds.pairwise_position_tol
            )?;
        }
        for a in &self.arms {
            let mut parts = Vec::new();
            if a.tail_position_error.is_some() {
                parts.push(format!(
                    "pos {} m, vel {} m/s, final {} m",
                    fmt_opt(a.tail_position_error),
                    fmt_opt(a.tail_velocity_error),
                    fmt_opt(a.final_position_error)
                ));
            }
            if a.joint_target_miss.is_some() {
                parts.push(format!("joint miss {} rad", fmt_opt(a.joint_target_miss)));
            }
            if a.tail_null_space_error.is_some() {
                parts.push(format!(
                    "null-space {} rad/s, manip {}",
                    fmt_opt(a.tail_null_space_error),
                    fmt_opt(a.tail_mean_manipulability)
                ));
            }
            if !parts.is_empty() {
                writeln!(f, "arm {}: {}", a.arm, parts.join(", "))?;
            }
        }
        for failure in &self.failures {
            writeln!(f, "FAIL: {failure}")?;
        }
        writeln!(f, "verdict: {}", if self.passed { "PASS" } else { "FAIL" })
    }
}

/// Closed-form settle-time bound for this scenario's initial conditions, or
/// `None` when no reference exists or a rate margin is nonpositive.
pub fn settle_bound(config: &ScenarioConfig) -> Option<f64> {
    let leader = config.leader.as_ref()?;
    let stack0 = leader.stack(0.0);
    let mut worst = [0.0f64; 3];
    for init in config.initial_conditions() {
        for block in 0..3 {
            for c in 0..2 {
                let k = 2 * block + c;
                worst[block] = worst[block].max((init.zeta[k] - stack0[k]).abs());
            }
        }
    }
    dcea::settle_time_bound(
        &worst,
        &config.estimator.beta,
        &leader.derivative_sups(),
        0.0,
    )
    .ok()
}

struct Columns<'a> {
    trace: &'a SimTrace,
}

impl<'a> Columns<'a> {
    fn get(&self, name: &str) -> Result<Vec<f64>, TraceError> {
        self.trace.column(name)
    }
}

/// Computes the report for a finished run.
///
/// Fails only when the trace is empty or lacks a column the scenario says it
/// must have (a sign the trace belongs to a different scenario).
pub fn compute_report(
    trace: &SimTrace,
    config: &ScenarioConfig,
    thresholds: &Thresholds,
) -> Result<RunReport, TraceError> {
    if trace.n_rows() == 0 {
        return Err(TraceError::Empty);
    }
    let cols = Columns { trace };
    let times = trace.times()?;
    let n_rows = times.len();
    let duration = *times.last().expect("nonempty");
    let tail_start = times[0] + (duration - times[0]) * (1.0 - thresholds.tail_fraction);
    let tail0 = times.partition_point(|&t| t < tail_start - 1e-9);
    let n_arms = config.arms.len();
    let has_leader = config.leader.is_some();

    // settle metric per row: worst disagreement across arms
    let mut settle_metric = vec![0.0f64; n_rows];
    let mut hats: Vec<Vec<Vec<f64>>> = Vec::new();
    if has_leader {
        for i in 1..=n_arms {
            let sigma = cols.get(&format!("sigma{i}"))?;
            for (m, s) in settle_metric.iter_mut().zip(&sigma) {
                *m = m.max(*s);
            }
        }
    } else {
        for i in 1..=n_arms {
            let mut arm_cols = Vec::new();
            for name in ["xhat", "vhat", "ahat"] {
                for c in ["x", "y"] {
                    arm_cols.push(cols.get(&format!("{name}{i}_{c}"))?);
                }
            }
            hats.push(arm_cols);
        }
        for r in 0..n_rows {
            let mut worst = 0.0f64;
            for i in 0..n_arms {
                for j in i + 1..n_arms {
                    for k in 0..6 {
                        worst = worst.max((hats[i][k][r] - hats[j][k][r]).abs());
                    }
                }
            }
            settle_metric[r] = worst;
        }
    }
    let last_bad = settle_metric
        .iter()
        .rposition(|&m| m >= thresholds.settle_tol);
    let observed_settle = match last_bad {
        None => Some(times[0]),
        Some(idx) if idx + 1 < n_rows => Some(times[idx + 1]),
        Some(_) => None,
    };

    let mut arms = Vec::new();
    let mut max_pos: Option<f64> = None;
    let mut max_vel: Option<f64> = None;
    let leader_v = if has_leader {
        Some((cols.get("v0_x")?, cols.get("v0_y")?))
    } else {
        None
    };
    for (i, arm) in config.arms.iter().enumerate() {
        let a = i + 1;
        let mut rep = ArmReport {
            arm: a,
            tail_position_error: None,
            tail_velocity_error: None,
            final_position_error: None,
            joint_target_miss: None,
            tail_null_space_error: None,
            tail_mean_manipulability: None,
        };
        if let Some((lv1, lv2)) = &leader_v {
            let e = cols.get(&format!("e_norm{a}"))?;
            let xd1 = cols.get(&format!("xd{a}_x"))?;
            let xd2 = cols.get(&format!("xd{a}_y"))?;
            let mut pos = 0.0f64;
            let mut vel = 0.0f64;
            for r in tail0..n_rows {
                pos = pos.max(e[r]);
                vel = vel.max(((xd1[r] - lv1[r]).powi(2) + (xd2[r] - lv2[r]).powi(2)).sqrt());
            }
            rep.tail_position_error = Some(pos);
            rep.tail_velocity_error = Some(vel);
            rep.final_position_error = Some(e[n_rows - 1]);
            max_pos = Some(max_pos.unwrap_or(0.0).max(pos));
            max_vel = Some(max_vel.unwrap_or(0.0).max(vel));
        }
        if let Subtask::JointTarget { joint, target, .. } = arm.subtask {
            let q = cols.get(&format!("q{a}_{}", joint + 1))?;
            rep.joint_target_miss = Some((q[n_rows - 1] - target).abs());
        }
        if arm.model.is_redundant() {
            let p = arm.model.dof();
            let es: Vec<Vec<f64>> = (1..=p)
                .map(|j| cols.get(&format!("es{a}_{j}")))
                .collect::<Result<_, _>>()?;
            let mut worst = 0.0f64;
            for r in tail0..n_rows {
                let norm2: f64 = es.iter().map(|c| c[r] * c[r]).sum();
                worst = worst.max(norm2.sqrt());
            }
            rep.tail_null_space_error = Some(worst);
            let manip = cols.get(&format!("manip{a}"))?;
            let mean = manip[tail0..].iter().sum::<f64>() / (n_rows - tail0) as f64;
            rep.tail_mean_manipulability = Some(mean);
        }
        arms.push(rep);
    }

    let mut pairwise_zeta = None;
    let mut pairwise_x = None;
    if !has_leader {
        let mut worst = 0.0f64;
        for r in tail0..n_rows {
            worst = worst.max(settle_metric[r]);
        }
        pairwise_zeta = Some(worst);
        let xs: Vec<(Vec<f64>, Vec<f64>)> = (1..=n_arms)
            .map(|a| Ok((cols.get(&format!("x{a}_x"))?, cols.get(&format!("x{a}_y"))?)))
            .collect::<Result<_, TraceError>>()?;
        let mut worst_x = 0.0f64;
        for r in tail0..n_rows {
            for i in 0..n_arms {
                for j in i + 1..n_arms {
                    let dx = xs[i].0[r] - xs[j].0[r];
                    let dy = xs[i].1[r] - xs[j].1[r];
                    worst_x = worst_x.max((dx * dx + dy * dy).sqrt());
                }
            }
        }
        pairwise_x = Some(worst_x);
    }

    let settle_bound = settle_bound(config);
    let mut failures = Vec::new();
    match observed_settle {
        None => failures.push(format!(
            "estimators never stay within {} of agreement",
            thresholds.settle_tol
        )),
        Some(observed) => {
            if let Some(bound) = settle_bound {
                let slack = config.control_period;
                if observed > bound + slack {
                    failures.push(format!(
                        "observed settle {observed:.3} s exceeds the bound {bound:.3} s plus one control period"
                    ));
                }
            }
        }
    }
    if let Some(worst) = max_pos {
        if worst >= thresholds.position_tol {
            failures.push(format!(
                "tail position error {worst:.4} m is not below {}",
                thresholds.position_tol
            ));
        }
    }
    if let Some(worst) = max_vel {
        if worst >= thresholds.velocity_tol {
            failures.push(format!(
                "tail velocity error {worst:.4} m/s is not below {}",
                thresholds.velocity_tol
            ));
        }
    }
    for rep in &arms {
        if let Some(miss) = rep.joint_target_miss {
            if miss >= thresholds.joint_target_tol {
                failures.push(format!(
                    "arm {} joint-target miss {miss:.4} rad is not below {}",
                    rep.arm, thresholds.joint_target_tol
                ));
            }
        }
        if let Some(es) = rep.tail_null_space_error {
            if es >= thresholds.null_space_tol {
                failures.push(format!(
                    "arm {} null-space error {es:.4} rad/s is not below {}",
                    rep.arm, thresholds.null_space_tol
                ));
            }
        }
    }
    if let Some(worst) = pairwise_zeta {
        if worst >= thresholds.pairwise_estimate_tol {
            failures.push(format!(
                "pairwise estimate disagreement {worst:.4} is not below {}",
                thresholds.pairwise_estimate_tol
            ));
        }
    }
    if let Some(worst) = pairwise_x {
        if worst >= thresholds.pairwise_position_tol {
            failures.push(format!(
                "pairwise end-effector disagreement {worst:.4} m is not below {}",
                thresholds.pairwise_position_tol
            ));
        }
    }

    Ok(RunReport {
        scenario: config.name.clone(),
        duration,
        tail_start,
        settle_bound,
        observed_settle,
        arms,
        max_tail_position_error: max_pos,
        max_tail_velocity_error: max_vel,
        pairwise_estimate_disagreement: pairwise_zeta,
        pairwise_position_disagreement: pairwise_x,
        thresholds: *thresholds,
        failures,
        passed: false,
    }
    .finish())
}

impl RunReport {
    fn finish(mut self) -> Self {
        self.passed = self.failures.is_empty();
        self
    }
}
