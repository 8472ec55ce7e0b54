//! The on-disk scenario format.
//!
//! Scenarios are TOML files. Unknown keys are rejected, all indices are
//! one-based (arms, joints, graph nodes), and every structural problem is
//! reported with a message naming the offending field. A complete example:
//!
//! ```toml
//! name = "two_arms"
//! duration = 10.0          # s
//! control_period = 0.01    # trace sampling and disturbance hold, s
//! dt = 0.0005              # integrator substep, must divide control_period
//! seed = 42
//! disturbance_max = 40.0   # uniform torque bound, 0 disables
//! update = "substep"       # or "tick": hold rates across a control period
//!
//! [estimator]
//! beta = [4.0, 7.0, 21.0]  # per-block switching gains
//! signum = "exact"         # or "smooth" with epsilon = 0.01
//!
//! [leader]
//! kind = "ellipse"         # or "fixed" with point = [x, y]
//! center = [1.2, 1.3]
//! radii = [0.5, 0.3]
//! angular_rate = 3.141592653589793
//! phase = 0.0              # optional
//!
//! [[arms]]
//! masses = [0.8, 0.6]      # two entries for a 2-joint arm, three for 3
//! lengths = [1.4, 0.9]
//! com_offsets = [0.8, 0.45]
//! inertias = [6.0, 3.0]
//! gravity = 9.81           # optional, defaults to 9.81
//! alpha = 3.0
//! k_x = [50.0, 50.0]
//! k_s = [100.0, 100.0]     # one entry per joint
//! k_r = [60.0, 60.0]
//! adaptation = 0.1         # scalar rate, applied to every parameter
//!
//! [[arms]]
//! masses = [0.8, 1.2, 1.4]
//! lengths = [0.8, 1.1, 1.4]
//! com_offsets = [0.4, 0.5, 0.7]
//! inertias = [4.0, 6.0, 5.0]
//! alpha = 3.0
//! k_x = [50.0, 50.0]
//! k_s = [150.0, 150.0, 150.0]
//! k_r = [60.0, 60.0, 60.0]
//! adaptation = 0.1
//!
//! [arms.subtask]
//! kind = "joint_target"    # or "manipulability" with just gain
//! joint = 2                # one-based
//! target = 1.0
//! gain = 9.0
//!
//! [topology]
//! edges = [[2, 1, 1.0]]    # [receiver, source, weight]: node 2 hears node 1
//! pinned = [1]             # nodes receiving the reference, gain 1
//! # pinning_gains = [1.0]  # optional per-pinned-node gains
//!
//! [init]
//! kind = "sampled"         # or "explicit" with [[init.arms]] tables
//! q_range = [-5.0, 5.0]
//! qdot_range = [-5.0, 5.0]
//! zeta_range = [-5.0, 5.0]
//! theta_range = [0.0, 5.0]
//! ```
//!
//! A switching topology replaces `edges`/`pinned` with segment tables:
//!
//! ```toml
//! [[topology.segments]]
//! start = 0.0
//! edges = [[2, 1, 1.0]]
//! pinned = [1]
//! ```
//!
//! An optional `[thresholds]` table overrides the default pass/fail bounds
//! applied to the run report (`settle_tol`, `position_tol`, `velocity_tol`,
//! `joint_target_tol`, `null_space_tol`, `pairwise_estimate_tol`,
//! `pairwise_position_tol`, `tail_fraction`).
//!
//! [`to_toml_string`] is the inverse of [`parse_scenario_str`]: it renders a
//! configuration back to scenario text, and the rendering is a fixpoint
//! (serializing what it parses to reproduces the text byte for byte).

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::arm::{ManipulatorModel, STANDARD_GRAVITY};
use crate::dcea::{ControlGains, EstimatorConfig, Signum};
use crate::error::ScenarioError;
use crate::graph::{Topology, TopologySchedule};
use crate::leader::LeaderTrajectory;
use crate::report::Thresholds;
use crate::sim::{ArmConfig, ArmInit, InitSpec, ScenarioConfig, UpdateCadence};
use crate::subtask::Subtask;

/// A parsed scenario: the runnable configuration plus the pass/fail
/// thresholds its report is judged against.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub thresholds: Thresholds,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    duration: f64,
    control_period: f64,
    dt: f64,
    seed: u64,
    #[serde(default)]
    disturbance_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    update: Option<String>,
    estimator: EstimatorFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leader: Option<LeaderFile>,
    arms: Vec<ArmFile>,
    topology: TopologyFile,
    init: InitFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<Thresholds>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimatorFile {
    beta: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeaderFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radii: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angular_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point: Option<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmFile {
    masses: Vec<f64>,
    lengths: Vec<f64>,
    com_offsets: Vec<f64>,
    inertias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<f64>,
    alpha: f64,
    k_x: [f64; 2],
    k_s: Vec<f64>,
    k_r: Vec<f64>,
    adaptation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subtask: Option<SubtaskFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubtaskFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pinned: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pinning_gains: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<Vec<SegmentFile>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pinned: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pinning_gains: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qdot_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zeta_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arms: Option<Vec<ArmInitFile>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmInitFile {
    q: Vec<f64>,
    qdot: Vec<f64>,
    zeta: Vec<f64>,
    theta_hat: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn require<T>(field: Option<T>, ctx: &str, name: &str) -> Result<T, ScenarioError> {
    field.ok_or_else(|| invalid(format!("{ctx} requires field \"{name}\"")))
}

fn forbid<T>(field: &Option<T>, ctx: &str, name: &str) -> Result<(), ScenarioError> {
    if field.is_some() {
        return Err(invalid(format!("{ctx} does not take field \"{name}\"")));
    }
    Ok(())
}

fn convert_leader(file: LeaderFile) -> Result<LeaderTrajectory, ScenarioError> {
    match file.kind.as_str() {
        "ellipse" => {
            let ctx = "leader kind \"ellipse\"";
            forbid(&file.point, ctx, "point")?;
            let center = require(file.center, ctx, "center")?;
            let radii = require(file.radii, ctx, "radii")?;
            let angular_rate = require(file.angular_rate, ctx, "angular_rate")?;
            let leader = LeaderTrajectory::Ellipse {
                center: Vector2::new(center[0], center[1]),
                radii: Vector2::new(radii[0], radii[1]),
                angular_rate,
                phase: file.phase.unwrap_or(0.0),
            };
            leader.validate()?;
            Ok(leader)
        }
        "fixed" => {
            let ctx = "leader kind \"fixed\"";
            forbid(&file.center, ctx, "center")?;
            forbid(&file.radii, ctx, "radii")?;
            forbid(&file.angular_rate, ctx, "angular_rate")?;
            forbid(&file.phase, ctx, "phase")?;
            let point = require(file.point, ctx, "point")?;
            let leader = LeaderTrajectory::Fixed {
                point: Vector2::new(point[0], point[1]),
            };
            leader.validate()?;
            Ok(leader)
        }
        other => Err(invalid(format!(
            "unknown leader kind {other:?}; expected \"ellipse\" or \"fixed\""
        ))),
    }
}

fn convert_subtask(file: SubtaskFile, arm: usize) -> Result<Subtask, ScenarioError> {
    let at = format!("arm {arm} subtask");
    match file.kind.as_str() {
        "joint_target" => {
            let ctx = format!("{at} kind \"joint_target\"");
            let joint = require(file.joint, &ctx, "joint")?;
            if joint == 0 {
                return Err(invalid(format!("{at}: joints are numbered from 1")));
            }
            Ok(Subtask::JointTarget {
                joint: joint - 1,
                target: require(file.target, &ctx, "target")?,
                gain: require(file.gain, &ctx, "gain")?,
            })
        }
        "manipulability" => {
            let ctx = format!("{at} kind \"manipulability\"");
            forbid(&file.joint, &ctx, "joint")?;
            forbid(&file.target, &ctx, "target")?;
            Ok(Subtask::Manipulability {
                gain: require(file.gain, &ctx, "gain")?,
            })
        }
        other => Err(invalid(format!(
            "{at}: unknown kind {other:?}; expected \"joint_target\" or \"manipulability\""
        ))),
    }
}

fn convert_arm(file: ArmFile, arm: usize) -> Result<ArmConfig, ScenarioError> {
    let dof = file.masses.len();
    let model = ManipulatorModel::new(
        file.masses,
        file.lengths,
        file.com_offsets,
        file.inertias,
        file.gravity.unwrap_or(STANDARD_GRAVITY),
    )
    .map_err(|e| invalid(format!("arm {arm}: {e}")))?;
    for (name, v) in [("k_s", &file.k_s), ("k_r", &file.k_r)] {
        if v.len() != dof {
            return Err(invalid(format!(
                "arm {arm}: {name} has {} entries for a {dof}-joint arm",
                v.len()
            )));
        }
    }
    let theta_dim = crate::regressor::theta_dim(dof);
    let gains = ControlGains::diagonal(
        file.alpha,
        file.k_x,
        &file.k_s,
        &file.k_r,
        &vec![file.adaptation; theta_dim],
    );
    let subtask = match file.subtask {
        Some(s) => {
            let s = convert_subtask(s, arm)?;
            s.validate(dof)?;
            s
        }
        None => Subtask::None,
    };
    Ok(ArmConfig {
        model,
        gains,
        subtask,
    })
}

fn build_topology(
    n: usize,
    edges: &[(usize, usize, f64)],
    pinned: &[usize],
    pinning_gains: Option<&[f64]>,
    ctx: &str,
) -> Result<Topology, ScenarioError> {
    let mut adjacency = DMatrix::zeros(n, n);
    for &(receiver, source, weight) in edges {
        for (what, node) in [("receiver", receiver), ("source", source)] {
            if node == 0 || node > n {
                return Err(invalid(format!(
                    "{ctx}: edge {what} {node} out of range 1..={n}"
                )));
            }
        }
        if receiver == source {
            return Err(invalid(format!("{ctx}: self-edge on node {receiver}")));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(invalid(format!(
                "{ctx}: edge [{receiver}, {source}] weight must be positive, got {weight}"
            )));
        }
        let slot = &mut adjacency[(receiver - 1, source - 1)];
        if *slot != 0.0 {
            return Err(invalid(format!(
                "{ctx}: duplicate edge [{receiver}, {source}]"
            )));
        }
        *slot = weight;
    }
    let mut pinning = DVector::zeros(n);
    if let Some(gains) = pinning_gains {
        if gains.len() != pinned.len() {
            return Err(invalid(format!(
                "{ctx}: pinning_gains has {} entries, pinned has {}",
                gains.len(),
                pinned.len()
            )));
        }
    }
    for (k, &node) in pinned.iter().enumerate() {
        if node == 0 || node > n {
            return Err(invalid(format!(
                "{ctx}: pinned node {node} out of range 1..={n}"
            )));
        }
        if pinning[node - 1] != 0.0 {
            return Err(invalid(format!("{ctx}: node {node} pinned twice")));
        }
        let gain = pinning_gains.map_or(1.0, |g| g[k]);
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(invalid(format!(
                "{ctx}: pinning gain for node {node} must be positive, got {gain}"
            )));
        }
        pinning[node - 1] = gain;
    }
    Topology::new(adjacency, pinning)
}

fn convert_topology(file: TopologyFile, n: usize) -> Result<TopologySchedule, ScenarioError> {
    match (&file.segments, &file.edges) {
        (Some(_), Some(_)) => Err(invalid(
            "topology takes either edges/pinned or segments, not both",
        )),
        (Some(segments), None) => {
            forbid(&file.pinned, "switching topology", "pinned")?;
            forbid(&file.pinning_gains, "switching topology", "pinning_gains")?;
            if segments.is_empty() {
                return Err(invalid("topology.segments is empty"));
            }
            let built = segments
                .iter()
                .enumerate()
                .map(|(k, seg)| {
                    let ctx = format!("topology segment {}", k + 1);
                    let topo = build_topology(
                        n,
                        seg.edges.as_deref().unwrap_or(&[]),
                        seg.pinned.as_deref().unwrap_or(&[]),
                        seg.pinning_gains.as_deref(),
                        &ctx,
                    )?;
                    Ok((seg.start, topo))
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            TopologySchedule::new(built)
        }
        (None, _) => {
            let topo = build_topology(
                n,
                file.edges.as_deref().unwrap_or(&[]),
                file.pinned.as_deref().unwrap_or(&[]),
                file.pinning_gains.as_deref(),
                "topology",
            )?;
            Ok(TopologySchedule::single(topo))
        }
    }
}

fn convert_estimator(file: EstimatorFile) -> Result<EstimatorConfig, ScenarioError> {
    let signum = match file.signum.as_deref().unwrap_or("exact") {
        "exact" => {
            forbid(&file.epsilon, "estimator signum \"exact\"", "epsilon")?;
            Signum::Exact
        }
        "smooth" => {
            let epsilon = require(file.epsilon, "estimator signum \"smooth\"", "epsilon")?;
            if !(epsilon > 0.0) || !epsilon.is_finite() {
                return Err(invalid(format!(
                    "estimator epsilon must be positive, got {epsilon}"
                )));
            }
            Signum::Smooth { epsilon }
        }
        other => {
            return Err(invalid(format!(
                "unknown estimator signum {other:?}; expected \"exact\" or \"smooth\""
            )))
        }
    };
    Ok(EstimatorConfig {
        beta: file.beta,
        signum,
    })
}

fn convert_init(file: InitFile, arms: &[ArmConfig]) -> Result<InitSpec, ScenarioError> {
    match file.kind.as_str() {
        "sampled" => {
            let ctx = "init kind \"sampled\"";
            forbid(&file.arms, ctx, "arms")?;
            let range = |r: [f64; 2]| (r[0], r[1]);
            Ok(InitSpec::Sampled {
                q_range: range(require(file.q_range, ctx, "q_range")?),
                qdot_range: range(require(file.qdot_range, ctx, "qdot_range")?),
                zeta_range: range(require(file.zeta_range, ctx, "zeta_range")?),
                theta_range: range(require(file.theta_range, ctx, "theta_range")?),
            })
        }
        "explicit" => {
            let ctx = "init kind \"explicit\"";
            forbid(&file.q_range, ctx, "q_range")?;
            forbid(&file.qdot_range, ctx, "qdot_range")?;
            forbid(&file.zeta_range, ctx, "zeta_range")?;
            forbid(&file.theta_range, ctx, "theta_range")?;
            let inits = require(file.arms, ctx, "arms")?;
            if inits.len() != arms.len() {
                return Err(invalid(format!(
                    "init.arms has {} entries, scenario has {} arms",
                    inits.len(),
                    arms.len()
                )));
            }
            Ok(InitSpec::Explicit(
                inits
                    .into_iter()
                    .map(|i| ArmInit {
                        q: DVector::from_vec(i.q),
                        qdot: DVector::from_vec(i.qdot),
                        zeta: DVector::from_vec(i.zeta),
                        theta_hat: DVector::from_vec(i.theta_hat),
                    })
                    .collect(),
            ))
        }
        other => Err(invalid(format!(
            "unknown init kind {other:?}; expected \"sampled\" or \"explicit\""
        ))),
    }
}

fn convert(file: ScenarioFile, fallback_name: &str) -> Result<LoadedScenario, ScenarioError> {
    if file.arms.is_empty() {
        return Err(invalid("scenario has no [[arms]] tables"));
    }
    let cadence = match file.update.as_deref().unwrap_or("substep") {
        "substep" => UpdateCadence::Substep,
        "tick" => UpdateCadence::Tick,
        other => {
            return Err(invalid(format!(
                "unknown update cadence {other:?}; expected \"substep\" or \"tick\""
            )))
        }
    };
    let arms = file
        .arms
        .into_iter()
        .enumerate()
        .map(|(i, a)| convert_arm(a, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    let topology = convert_topology(file.topology, arms.len())?;
    let leader = file.leader.map(convert_leader).transpose()?;
    let estimator = convert_estimator(file.estimator)?;
    let init = convert_init(file.init, &arms)?;
    let thresholds = file.thresholds.unwrap_or_default();
    thresholds.validate()?;
    Ok(LoadedScenario {
        config: ScenarioConfig {
            name: file.name.unwrap_or_else(|| fallback_name.to_string()),
            arms,
            topology,
            leader,
            estimator,
            duration: file.duration,
            control_period: file.control_period,
            dt: file.dt,
            cadence,
            disturbance_max: file.disturbance_max,
            seed: file.seed,
            init,
        },
        thresholds,
    })
}

/// Parses a scenario from TOML text. `fallback_name` names the scenario when
/// the file does not.
pub fn parse_scenario_str(
    text: &str,
    fallback_name: &str,
) -> Result<LoadedScenario, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    convert(file, fallback_name)
}

/// Reads and parses a scenario file. Structural problems surface here;
/// runnability (gain signs, cadence arithmetic, reachability warnings) is
/// checked by [`ScenarioConfig::validate`].
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    parse_scenario_str(&text, &fallback)
}

fn diagonal_entries(m: &DMatrix<f64>, what: &str, arm: usize) -> Result<Vec<f64>, ScenarioError> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)] != 0.0 {
                return Err(invalid(format!(
                    "arm {arm}: {what} is not diagonal and cannot be written as scenario text"
                )));
            }
        }
    }
    Ok((0..m.nrows().min(m.ncols())).map(|k| m[(k, k)]).collect())
}

fn arm_to_file(arm: &ArmConfig, index: usize) -> Result<ArmFile, ScenarioError> {
    let model = &arm.model;
    let gains = &arm.gains;
    if gains.k_x[(0, 1)] != 0.0 || gains.k_x[(1, 0)] != 0.0 {
        return Err(invalid(format!(
            "arm {index}: k_x is not diagonal and cannot be written as scenario text"
        )));
    }
    let adaptation = diagonal_entries(&gains.adaptation, "adaptation", index)?;
    let Some((&first, rest)) = adaptation.split_first() else {
        return Err(invalid(format!("arm {index}: adaptation matrix is empty")));
    };
    if rest.iter().any(|&v| v != first) {
        return Err(invalid(format!(
            "arm {index}: adaptation rates differ per parameter and cannot be written as scenario text"
        )));
    }
    let subtask = match arm.subtask {
        Subtask::None => None,
        Subtask::JointTarget {
            joint,
            target,
            gain,
        } => Some(SubtaskFile {
            kind: "joint_target".into(),
            joint: Some(joint + 1),
            target: Some(target),
            gain: Some(gain),
        }),
        Subtask::Manipulability { gain } => Some(SubtaskFile {
            kind: "manipulability".into(),
            joint: None,
            target: None,
            gain: Some(gain),
        }),
    };
    Ok(ArmFile {
        masses: model.masses().to_vec(),
        lengths: model.lengths().to_vec(),
        com_offsets: model.com_offsets().to_vec(),
        inertias: model.inertias().to_vec(),
        gravity: (model.gravity() != STANDARD_GRAVITY).then(|| model.gravity()),
        alpha: gains.alpha,
        k_x: [gains.k_x[(0, 0)], gains.k_x[(1, 1)]],
        k_s: diagonal_entries(&gains.k_s, "k_s", index)?,
        k_r: diagonal_entries(&gains.k_r, "k_r", index)?,
        adaptation: first,
        subtask,
    })
}

/// One-based edge list, pinned nodes, and pinning gains recovered from a
/// topology, each `None` when empty or redundant.
type TopologyParts = (
    Option<Vec<(usize, usize, f64)>>,
    Option<Vec<usize>>,
    Option<Vec<f64>>,
);

fn topology_parts(topo: &Topology) -> TopologyParts {
    let n = topo.n();
    let mut edges = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let w = topo.adjacency[(r, c)];
            if w != 0.0 {
                edges.push((r + 1, c + 1, w));
            }
        }
    }
    let pinned: Vec<usize> = (0..n).filter(|&k| topo.pinning[k] != 0.0).collect();
    let gains: Vec<f64> = pinned.iter().map(|&k| topo.pinning[k]).collect();
    let pinning_gains = gains.iter().any(|&g| g != 1.0).then_some(gains);
    (
        (!edges.is_empty()).then_some(edges),
        (!pinned.is_empty()).then(|| pinned.iter().map(|&k| k + 1).collect()),
        pinning_gains,
    )
}

fn topology_to_file(schedule: &TopologySchedule) -> TopologyFile {
    let segments = schedule.segments();
    if segments.len() == 1 {
        let (edges, pinned, pinning_gains) = topology_parts(&segments[0].1);
        TopologyFile {
            edges,
            pinned,
            pinning_gains,
            segments: None,
        }
    } else {
        TopologyFile {
            edges: None,
            pinned: None,
            pinning_gains: None,
            segments: Some(
                segments
                    .iter()
                    .map(|(start, topo)| {
                        let (edges, pinned, pinning_gains) = topology_parts(topo);
                        SegmentFile {
                            start: *start,
                            edges,
                            pinned,
                            pinning_gains,
                        }
                    })
                    .collect(),
            ),
        }
    }
}

fn to_file(
    config: &ScenarioConfig,
    thresholds: &Thresholds,
) -> Result<ScenarioFile, ScenarioError> {
    let leader = config.leader.as_ref().map(|l| match l {
        LeaderTrajectory::Ellipse {
            center,
            radii,
            angular_rate,
            phase,
        } => LeaderFile {
            kind: "ellipse".into(),
            center: Some([center.x, center.y]),
            radii: Some([radii.x, radii.y]),
            angular_rate: Some(*angular_rate),
            phase: (*phase != 0.0).then_some(*phase),
            point: None,
        },
        LeaderTrajectory::Fixed { point } => LeaderFile {
            kind: "fixed".into(),
            center: None,
            radii: None,
            angular_rate: None,
            phase: None,
            point: Some([point.x, point.y]),
        },
    });
    let estimator = match config.estimator.signum {
        Signum::Exact => EstimatorFile {
            beta: config.estimator.beta,
            signum: None,
            epsilon: None,
        },
        Signum::Smooth { epsilon } => EstimatorFile {
            beta: config.estimator.beta,
            signum: Some("smooth".into()),
            epsilon: Some(epsilon),
        },
    };
    let init = match &config.init {
        InitSpec::Sampled {
            q_range,
            qdot_range,
            zeta_range,
            theta_range,
        } => InitFile {
            kind: "sampled".into(),
            q_range: Some([q_range.0, q_range.1]),
            qdot_range: Some([qdot_range.0, qdot_range.1]),
            zeta_range: Some([zeta_range.0, zeta_range.1]),
            theta_range: Some([theta_range.0, theta_range.1]),
            arms: None,
        },
        InitSpec::Explicit(inits) => InitFile {
            kind: "explicit".into(),
            q_range: None,
            qdot_range: None,
            zeta_range: None,
            theta_range: None,
            arms: Some(
                inits
                    .iter()
                    .map(|i| ArmInitFile {
                        q: i.q.as_slice().to_vec(),
                        qdot: i.qdot.as_slice().to_vec(),
                        zeta: i.zeta.as_slice().to_vec(),
                        theta_hat: i.theta_hat.as_slice().to_vec(),
                    })
                    .collect(),
            ),
        },
    };
    Ok(ScenarioFile {
        name: Some(config.name.clone()),
        duration: config.duration,
        control_period: config.control_period,
        dt: config.dt,
        seed: config.seed,
        disturbance_max: config.disturbance_max,
        update: match config.cadence {
            UpdateCadence::Substep => None,
            UpdateCadence::Tick => Some("tick".into()),
        },
        estimator,
        leader,
        arms: config
            .arms
            .iter()
            .enumerate()
            .map(|(i, a)| arm_to_file(a, i + 1))
            .collect::<Result<Vec<_>, _>>()?,
        topology: topology_to_file(&config.topology),
        init,
        thresholds: Some(*thresholds),
    })
}

/// Renders a configuration back to scenario text. Parsing the result
/// reproduces the configuration, and rendering a parsed scenario is a
/// fixpoint: parse(to_toml_string(c)) serializes to the same bytes.
pub fn to_toml_string(
    config: &ScenarioConfig,
    thresholds: &Thresholds,
) -> Result<String, ScenarioError> {
    let file = to_file(config, thresholds)?;
    toml::to_string(&file)
        .map_err(|e| ScenarioError::Invalid(format!("cannot render scenario as TOML: {e}")))
}
