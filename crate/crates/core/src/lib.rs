//! Simulation library for networks of planar manipulators that cooperatively
//! track a moving reference in task space.
//!
//! Each arm is a two- or three-joint revolute chain with full rigid-body
//! dynamics. Arms do not measure the reference directly; a distributed
//! sliding-mode estimator reconstructs its position, velocity, and
//! acceleration over a directed communication graph, and a local adaptive
//! controller makes each end effector follow the estimate. Redundant arms
//! additionally steer their self-motion through a configurable subtask.
//!
//! The crate is organized around six areas:
//!
//! * [`arm`] and [`regressor`]: rigid-body dynamics, kinematics, and the
//!   lumped-parameter form used by the adaptive law,
//! * [`graph`]: communication topologies and their analysis,
//! * [`dcea`]: the estimator, the torque law, and the adaptation law,
//! * [`sim`] and [`trace`]: the fixed-step engine and its recorded output,
//! * [`report`] and [`figures`]: post-run metrics and SVG plots,
//! * [`scenario`]: the on-disk configuration format and its validation.
//!
//! Determinism is a hard contract: equal configurations and seeds produce
//! bit-identical traces on every run.

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would accept it; the index loops
// mirror the summation formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod arm;
pub mod checks;
pub mod dcea;
pub mod error;
pub mod figures;
pub mod graph;
pub mod leader;
pub mod regressor;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod subtask;
pub mod trace;

pub use arm::ManipulatorModel;
pub use checks::{run_all as run_checks, CheckResult};
pub use dcea::{ControlGains, ControlOutput, EstimatorConfig, EstimatorState, Signum};
pub use error::{DceaError, ModelError, ScenarioError, SimError, TraceError};
pub use figures::{render_figures, render_joint_comparison, render_manipulability_comparison};
pub use graph::{Topology, TopologySchedule};
pub use leader::LeaderTrajectory;
pub use report::{compute_report, settle_bound, ArmReport, RunReport, Thresholds};
pub use scenario::{parse_scenario, parse_scenario_str, to_toml_string, LoadedScenario};
pub use sim::{run, run_pair_subtask, ScenarioConfig};
pub use subtask::Subtask;
pub use trace::SimTrace;
