//! Python bindings: distributions, threshold design, lower bound, graphs and
//! scheme simulation.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sensorcast::harness::config::{ExperimentConfig, ExperimentKind, Settings};
use sensorcast::harness::experiments;
use sensorcast::harness::Table;
use sensorcast::{Error, Family, Scheme, SensorGraph, SymmetricDistribution, ThresholdProblem};

fn to_py(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.category());
    match e {
        Error::InvalidParameter(_) | Error::Domain(_) | Error::Config(_) | Error::Parse(_) => {
            PyValueError::new_err(msg)
        }
        _ => PyRuntimeError::new_err(msg),
    }
}

fn parse_family(name: &str) -> PyResult<Family> {
    name.parse().map_err(to_py)
}

#[pyclass(name = "Distribution", frozen)]
struct PyDistribution {
    inner: SymmetricDistribution,
}

#[pymethods]
impl PyDistribution {
    #[new]
    #[pyo3(signature = (family = "gaussian", scale = 1.0))]
    fn new(family: &str, scale: f64) -> PyResult<Self> {
        let inner = SymmetricDistribution::new(parse_family(family)?, scale).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().as_str()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn second_moment(&self) -> f64 {
        self.inner.second_moment()
    }

    fn folded_cdf(&self, t: f64) -> PyResult<f64> {
        self.inner.folded_cdf(t).map_err(to_py)
    }

    fn truncated_second_moment(&self, t: f64) -> PyResult<f64> {
        self.inner.truncated_second_moment(t).map_err(to_py)
    }

    fn inverse_folded_cdf(&self, q: f64) -> PyResult<f64> {
        self.inner.inverse_folded_cdf(q).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Distribution({:?}, {})",
            self.inner.family().as_str(),
            self.inner.scale()
        )
    }
}

#[pyclass(name = "ThresholdProblem", frozen)]
struct PyThresholdProblem {
    inner: ThresholdProblem,
}

#[pymethods]
impl PyThresholdProblem {
    #[new]
    #[pyo3(signature = (n, k, family = "gaussian", scale = 1.0))]
    fn new(n: usize, k: usize, family: &str, scale: f64) -> PyResult<Self> {
        let dist = SymmetricDistribution::new(parse_family(family)?, scale).map_err(to_py)?;
        let inner = ThresholdProblem::new(n, k, dist).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn cost(&self, t: f64) -> PyResult<f64> {
        self.inner.cost(t).map_err(to_py)
    }

    fn root_function(&self, t: f64) -> PyResult<f64> {
        self.inner.root_function_h(t).map_err(to_py)
    }

    #[pyo3(signature = (s_bar = sensorcast::threshold::DEFAULT_S_BAR))]
    fn bracket(&self, s_bar: f64) -> PyResult<(f64, f64)> {
        let b = self.inner.bracket(s_bar).map_err(to_py)?;
        Ok((b.lo, b.hi))
    }

    /// Returns `(T*, J(T*))`.
    #[pyo3(signature = (tol = sensorcast::threshold::DEFAULT_TOLERANCE))]
    fn optimal_threshold(&self, tol: f64) -> PyResult<(f64, f64)> {
        let s = self.inner.optimal_threshold(tol).map_err(to_py)?;
        Ok((s.t_star, s.j_star))
    }

    fn lower_bound(&self) -> PyResult<f64> {
        sensorcast::centralized_lower_bound(&self.inner).map_err(to_py)
    }
}

#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: SensorGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self {
            inner: SensorGraph::from_edges(n, edges).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: SensorGraph::complete(n).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, p_edge, seed = 2020))]
    fn erdos_renyi(n: usize, p_edge: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: SensorGraph::erdos_renyi(n, p_edge, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d_max(&self) -> usize {
        self.inner.d_max()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn algebraic_connectivity(&self) -> f64 {
        self.inner.algebraic_connectivity()
    }

    fn slem(&self) -> PyResult<f64> {
        self.inner.slem().map_err(to_py)
    }

    fn consensus_step(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        if y.len() != self.inner.n() {
            return Err(PyValueError::new_err("vector length must equal the node count"));
        }
        let mut out = vec![0.0; y.len()];
        self.inner.consensus_step(&y, &mut out);
        Ok(out)
    }
}

#[pyfunction]
#[pyo3(signature = (n, k, family = "gaussian", scale = 1.0))]
fn lower_bound(n: usize, k: usize, family: &str, scale: f64) -> PyResult<f64> {
    let dist = SymmetricDistribution::new(parse_family(family)?, scale).map_err(to_py)?;
    sensorcast::centralized_lower_bound_for(n, k, &dist).map_err(to_py)
}

#[pyfunction]
fn switching_time(rho: f64, delta: f64) -> PyResult<u64> {
    sensorcast::switching_time(rho, delta).map_err(to_py)
}

fn table_dict<'py>(py: Python<'py>, table: &Table) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    for (i, name) in table.columns.iter().enumerate() {
        let column: Vec<f64> = table.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect();
        dict.set_item(name, column)?;
    }
    dict.set_item("comments", table.comments.clone())?;
    Ok(dict)
}

/// Runs `paths` Monte Carlo paths of a scheme on `graph` and returns the
/// per-round columns as a dict of lists. Extra keyword options use the
/// config-file keys (`alpha`, `tau`, `delta`, `p`, `assumed_family`, ...).
#[pyfunction]
#[pyo3(signature = (graph, scheme, k, rounds, paths = 10, seed = 2020, family = "gaussian", scale = 1.0, **options))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    scheme: &str,
    k: usize,
    rounds: u64,
    paths: usize,
    seed: u64,
    family: &str,
    scale: f64,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme: Scheme = scheme.parse().map_err(to_py)?;
    let mut settings = Settings::new();
    settings.set("n", graph.inner.n().to_string());
    settings.set("k", k.to_string());
    settings.set("rounds", rounds.to_string());
    settings.set("paths", paths.to_string());
    settings.set("seed", seed.to_string());
    settings.set("family", family);
    settings.set("scale", scale.to_string());
    if let Some(options) = options {
        for (key, value) in options.iter() {
            settings.set(&key.extract::<String>()?, value.str()?.to_string());
        }
    }
    let cfg = ExperimentConfig::from_settings(ExperimentKind::for_scheme(scheme), &settings).map_err(to_py)?;
    let out = py
        .detach(|| experiments::simulate(&cfg, scheme, &graph.inner))
        .map_err(to_py)?;
    table_dict(py, &out.table)
}

#[pymodule]
fn sensorcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyThresholdProblem>()?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(switching_time, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
