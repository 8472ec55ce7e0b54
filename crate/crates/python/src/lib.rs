//! Python bindings for the manipulator-network simulator.
//!
//! The module mirrors the library's main types: `Arm` wraps the rigid-body
//! model of a single planar chain, `Topology` wraps the communication graph,
//! and `Trace` wraps a finished simulation's column-major samples. Scenario
//! execution, reporting, figure rendering, and the built-in verification
//! suite are exposed as free functions that accept TOML text or file paths.
//!
//! Matrices cross the boundary as row-major `list[list[float]]`, vectors as
//! `list[float]`. Invalid input surfaces as `ValueError`, failures inside a
//! running simulation (singular Jacobian, non-finite state) as
//! `RuntimeError`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use armnet_core::{
    compute_report, parse_scenario, parse_scenario_str, regressor, render_figures, run, run_checks,
    run_pair_subtask, ManipulatorModel, SimTrace, Topology,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn to_dmatrix(name: &str, rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(PyValueError::new_err(format!("{name} must be non-empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!(
            "{name} rows must all have length {ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Rigid-body model of one planar revolute chain with two or three links.
#[pyclass(name = "Arm", module = "armnet_py")]
struct PyArm {
    inner: ManipulatorModel,
}

#[pymethods]
impl PyArm {
    /// Builds a chain from per-link masses, lengths, center-of-mass offsets
    /// and rotational inertias. `gravity` is the field strength in the plane.
    #[new]
    #[pyo3(signature = (masses, lengths, com_offsets, inertias, gravity = 9.81))]
    fn new(
        masses: Vec<f64>,
        lengths: Vec<f64>,
        com_offsets: Vec<f64>,
        inertias: Vec<f64>,
        gravity: f64,
    ) -> PyResult<Self> {
        ManipulatorModel::new(masses, lengths, com_offsets, inertias, gravity)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    /// True lumped parameter vector of the chain.
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta_true().iter().copied().collect()
    }

    fn inertia_matrix(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let m = self
            .inner
            .inertia_matrix(&DVector::from_vec(q))
            .map_err(value_err)?;
        Ok(matrix_rows(&m))
    }

    fn coriolis_matrix(&self, q: Vec<f64>, qdot: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let m = self
            .inner
            .coriolis_matrix(&DVector::from_vec(q), &DVector::from_vec(qdot))
            .map_err(value_err)?;
        Ok(matrix_rows(&m))
    }

    fn inertia_matrix_dot(&self, q: Vec<f64>, qdot: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let m = self
            .inner
            .inertia_matrix_dot(&DVector::from_vec(q), &DVector::from_vec(qdot))
            .map_err(value_err)?;
        Ok(matrix_rows(&m))
    }

    fn gravity_vector(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        let g = self
            .inner
            .gravity_vector(&DVector::from_vec(q))
            .map_err(value_err)?;
        Ok(g.iter().copied().collect())
    }

    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self
            .inner
            .jacobian(&DVector::from_vec(q))
            .map_err(value_err)?;
        Ok(matrix_rows(&j))
    }

    /// Task-space inverse of the Jacobian: the plain inverse for two links,
    /// the Moore-Penrose pseudoinverse for three.
    fn j_sharp(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self
            .inner
            .j_sharp(&DVector::from_vec(q))
            .map_err(runtime_err)?;
        Ok(matrix_rows(&j))
    }

    fn null_projector(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let p = self
            .inner
            .null_projector(&DVector::from_vec(q))
            .map_err(runtime_err)?;
        Ok(matrix_rows(&p))
    }

    fn min_singular_value(&self, q: Vec<f64>) -> PyResult<f64> {
        self.inner
            .min_singular_value(&DVector::from_vec(q))
            .map_err(value_err)
    }

    fn forward_kinematics(&self, q: Vec<f64>) -> PyResult<(f64, f64)> {
        let x = self
            .inner
            .forward_kinematics(&DVector::from_vec(q))
            .map_err(value_err)?;
        Ok((x.x, x.y))
    }

    /// Regressor matrix of the lumped-parameter identity
    /// `Y(q, qdot, y, x) theta = H(q) x + C(q, qdot) y + g(q)`.
    fn regressor(
        &self,
        q: Vec<f64>,
        qdot: Vec<f64>,
        y: Vec<f64>,
        x: Vec<f64>,
    ) -> PyResult<Vec<Vec<f64>>> {
        let m = regressor::regressor(
            &self.inner,
            &DVector::from_vec(q),
            &DVector::from_vec(qdot),
            &DVector::from_vec(y),
            &DVector::from_vec(x),
        )
        .map_err(value_err)?;
        Ok(matrix_rows(&m))
    }

    fn __repr__(&self) -> String {
        format!("Arm(dof={})", self.inner.dof())
    }
}

/// Directed communication graph with reference pinning.
#[pyclass(name = "Topology", module = "armnet_py")]
struct PyTopology {
    inner: Topology,
}

#[pymethods]
impl PyTopology {
    /// Builds a graph from a row-major adjacency matrix (entry `[i][j] > 0`
    /// means node `i` receives from node `j`) and a pinning vector whose
    /// positive entries mark nodes with direct reference access.
    #[new]
    fn new(adjacency: Vec<Vec<f64>>, pinning: Vec<f64>) -> PyResult<Self> {
        let a = to_dmatrix("adjacency", &adjacency)?;
        Topology::new(a, DVector::from_vec(pinning))
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn adjacency(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.adjacency)
    }

    #[getter]
    fn pinning(&self) -> Vec<f64> {
        self.inner.pinning.iter().copied().collect()
    }

    /// In-degree Laplacian of the graph, row-major.
    fn laplacian(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.laplacian())
    }

    /// True when information from the pinned reference can reach every node.
    fn leader_reachable(&self) -> bool {
        self.inner.leader_reachable()
    }

    /// True when some node can reach every other node over the edges alone.
    fn spanning_tree_exists(&self) -> bool {
        self.inner.spanning_tree_exists()
    }

    fn __repr__(&self) -> String {
        format!("Topology(n={})", self.inner.n())
    }
}

/// Column-major record of one finished simulation.
#[pyclass(name = "Trace", module = "armnet_py")]
struct PyTrace {
    inner: SimTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns().to_vec()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    /// Full column by name.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner.column(name).map_err(value_err)
    }

    /// One sample row in column order.
    fn row(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.n_rows() {
            return Err(PyValueError::new_err(format!(
                "row {index} out of range for {} rows",
                self.inner.n_rows()
            )));
        }
        Ok(self.inner.row(index).to_vec())
    }

    /// The trace rendered as CSV, bit-identical across equal-seed runs.
    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(Path::new(path)).map_err(runtime_err)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        SimTrace::read_csv(Path::new(path))
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(columns={}, rows={})",
            self.inner.n_cols(),
            self.inner.n_rows()
        )
    }
}

/// Runs the scenario stored at `path` and returns its trace.
#[pyfunction]
fn run_scenario(path: &str) -> PyResult<PyTrace> {
    let loaded = parse_scenario(path).map_err(value_err)?;
    run(&loaded.config)
        .map(|inner| PyTrace { inner })
        .map_err(runtime_err)
}

/// Runs a scenario given as TOML text and returns its trace.
#[pyfunction]
fn run_scenario_str(text: &str) -> PyResult<PyTrace> {
    let loaded = parse_scenario_str(text, "inline").map_err(value_err)?;
    run(&loaded.config)
        .map(|inner| PyTrace { inner })
        .map_err(runtime_err)
}

/// Runs the scenario twice from identical seeds, with its null-space
/// subtasks enabled and disabled, and returns both traces in that order.
#[pyfunction]
fn run_subtask_pair(path: &str) -> PyResult<(PyTrace, PyTrace)> {
    let loaded = parse_scenario(path).map_err(value_err)?;
    let (with, without) = run_pair_subtask(&loaded.config).map_err(runtime_err)?;
    Ok((PyTrace { inner: with }, PyTrace { inner: without }))
}

/// Runs the scenario at `path` and returns its threshold report as text.
#[pyfunction]
fn report(path: &str) -> PyResult<String> {
    let loaded = parse_scenario(path).map_err(value_err)?;
    let trace = run(&loaded.config).map_err(runtime_err)?;
    let report = compute_report(&trace, &loaded.config, &loaded.thresholds).map_err(runtime_err)?;
    Ok(report.to_string())
}

/// Runs the built-in verification suite and returns
/// `(name, passed, detail)` triples.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn self_checks(seed: u64) -> Vec<(String, bool, String)> {
    run_checks(seed)
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

/// Runs the scenario at `path` and renders its standard figures into
/// `out_dir`, returning the written file paths.
#[pyfunction]
fn render_scenario_figures(path: &str, out_dir: &str) -> PyResult<Vec<String>> {
    let loaded = parse_scenario(path).map_err(value_err)?;
    let trace = run(&loaded.config).map_err(runtime_err)?;
    let written = render_figures(&trace, Path::new(out_dir)).map_err(runtime_err)?;
    Ok(written
        .into_iter()
        .map(|p| p.display().to_string())
        .collect())
}

#[pymodule]
fn armnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArm>()?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_str, m)?)?;
    m.add_function(wrap_pyfunction!(run_subtask_pair, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(self_checks, m)?)?;
    m.add_function(wrap_pyfunction!(render_scenario_figures, m)?)?;
    Ok(())
}
