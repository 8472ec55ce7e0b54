//! Directed communication topologies between arms.
//!
//! Edge-direction convention, used everywhere in this crate and in scenario
//! files: `adjacency[(i, j)] > 0` means node i RECEIVES information from
//! node j (an edge j -> i in information-flow terms). Row i therefore lists
//! the in-neighbors of node i. `pinning[i] > 0` means node i additionally
//! receives the reference signal directly.

use nalgebra::{DMatrix, DVector};

use crate::error::ScenarioError;

/// A weighted digraph over `n` arms plus per-node reference access.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Nonnegative weights; `adjacency[(i, j)]` weighs the edge j -> i.
    pub adjacency: DMatrix<f64>,
    /// Nonnegative pinning gains; positive entries receive the reference.
    pub pinning: DVector<f64>,
}

impl Topology {
    /// Builds and validates a topology: square adjacency, matching pinning
    /// length, nonnegative weights, empty diagonal.
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self, ScenarioError> {
        if adjacency.nrows() != adjacency.ncols() {
            return Err(ScenarioError::Invalid(format!(
                "adjacency must be square, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        let n = adjacency.nrows();
        if pinning.len() != n {
            return Err(ScenarioError::Invalid(format!(
                "pinning has {} entries for {} nodes",
                pinning.len(),
                n
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "self-edge on node {}",
                    i + 1
                )));
            }
            for j in 0..n {
                if !(adjacency[(i, j)] >= 0.0) {
                    return Err(ScenarioError::Invalid(format!(
                        "negative or non-finite weight on edge {} -> {}",
                        j + 1,
                        i + 1
                    )));
                }
            }
            if !(pinning[i] >= 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "negative or non-finite pinning on node {}",
                    i + 1
                )));
            }
        }
        Ok(Self { adjacency, pinning })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    /// In-neighbors of node i (nodes it receives from) with their weights.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.n();
        (0..n).filter_map(move |j| {
            let w = self.adjacency[(i, j)];
            (w > 0.0).then_some((j, w))
        })
    }

    /// Graph Laplacian `L = D - A` with in-degree `d_i = sum_j adjacency[(i, j)]`.
    /// Every row sums to zero.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = -self.adjacency.clone();
        for i in 0..n {
            l[(i, i)] = self.adjacency.row(i).sum();
        }
        l
    }

    /// True when every node can be reached from the reference through the
    /// graph augmented with pinning edges; the condition under which the
    /// distributed estimator converges everywhere.
    pub fn leader_reachable(&self) -> bool {
        let n = self.n();
        let mut reached = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| self.pinning[i] > 0.0).collect();
        for &i in &stack {
            reached[i] = true;
        }
        while let Some(j) = stack.pop() {
            // information flows from j to any node listing j as an in-neighbor
            for i in 0..n {
                if !reached[i] && self.adjacency[(i, j)] > 0.0 {
                    reached[i] = true;
                    stack.push(i);
                }
            }
        }
        reached.iter().all(|&r| r)
    }

    /// True when some node reaches every other node along information-flow
    /// edges; the leaderless consensus condition.
    pub fn spanning_tree_exists(&self) -> bool {
        let n = self.n();
        (0..n).any(|root| {
            let mut reached = vec![false; n];
            reached[root] = true;
            let mut stack = vec![root];
            while let Some(j) = stack.pop() {
                for i in 0..n {
                    if !reached[i] && self.adjacency[(i, j)] > 0.0 {
                        reached[i] = true;
                        stack.push(i);
                    }
                }
            }
            reached.iter().all(|&r| r)
        })
    }
}

/// A piecewise-constant topology over time.
///
/// Segments are half-open `[start_k, start_(k+1))`; lookups are
/// right-continuous, so a query at exactly a switch time sees the new
/// topology.
#[derive(Debug, Clone)]
pub struct TopologySchedule {
    segments: Vec<(f64, Topology)>,
}

impl TopologySchedule {
    /// Builds a schedule. Start times must be finite and strictly increasing,
    /// and all topologies must agree on the node count.
    pub fn new(segments: Vec<(f64, Topology)>) -> Result<Self, ScenarioError> {
        if segments.is_empty() {
            return Err(ScenarioError::Invalid("schedule has no segments".into()));
        }
        let n = segments[0].1.n();
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(ScenarioError::Invalid(
                    "schedule start times must be strictly increasing".into(),
                ));
            }
        }
        for (s, topo) in &segments {
            if !s.is_finite() {
                return Err(ScenarioError::Invalid("non-finite segment start".into()));
            }
            if topo.n() != n {
                return Err(ScenarioError::Invalid(
                    "all scheduled topologies must have the same node count".into(),
                ));
            }
        }
        Ok(Self { segments })
    }

    pub fn single(topology: Topology) -> Self {
        Self {
            segments: vec![(f64::NEG_INFINITY, topology)],
        }
    }

    pub fn n(&self) -> usize {
        self.segments[0].1.n()
    }

    pub fn segments(&self) -> &[(f64, Topology)] {
        &self.segments
    }

    /// The segment index and topology in force at time `t`: the last segment
    /// whose start is at or before `t`. Queries before the first start clamp
    /// to the first segment.
    pub fn active_at(&self, t: f64) -> (usize, &Topology) {
        let mut idx = 0;
        for (k, (start, _)) in self.segments.iter().enumerate() {
            if *start <= t {
                idx = k;
            } else {
                break;
            }
        }
        (idx, &self.segments[idx].1)
    }
}
