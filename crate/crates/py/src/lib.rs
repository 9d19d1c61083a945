//! Python bindings. Arrays cross the boundary as nested lists and configs
//! and reports as JSON strings.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use xorgd::diagnostics::{self, DiagnosticsConfig};
use xorgd::distribution::{self, MeanMode};
use xorgd::lab::{self, ExperimentConfig};
use xorgd::trainer::{self, SnapshotPolicy, TrainConfig};
use xorgd::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(data: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((n, d), data.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "DistributionSpec", frozen)]
struct PySpec(distribution::DistributionSpec);

#[pymethods]
impl PySpec {
    /// Canonical (`mu1 = e1`, `mu2 = e2`) or random orthonormal means.
    #[new]
    #[pyo3(signature = (d, sigma, eta, mean_mode = "canonical", seed = 0))]
    fn new(d: usize, sigma: f64, eta: f64, mean_mode: &str, seed: u64) -> PyResult<Self> {
        let mode = match mean_mode {
            "canonical" => MeanMode::Canonical,
            "random" | "random_orthonormal" => MeanMode::RandomOrthonormal,
            other => return Err(PyValueError::new_err(format!("unknown mean mode `{other}`"))),
        };
        distribution::make_spec(d, sigma, eta, mode, seed).map(PySpec).map_err(to_py)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta()
    }

    #[getter]
    fn mu1(&self) -> Vec<f64> {
        self.0.mu1().to_vec()
    }

    #[getter]
    fn mu2(&self) -> Vec<f64> {
        self.0.mu2().to_vec()
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<PyDataset> {
        distribution::sample_dataset(&self.0, n, seed).map(PyDataset).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("DistributionSpec(d={}, sigma={}, eta={})", self.0.d(), self.0.sigma(), self.0.eta())
    }
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset(distribution::Dataset);

#[pymethods]
impl PyDataset {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        rows(self.0.points())
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.0.labels().to_vec()
    }

    #[getter]
    fn clean_labels(&self) -> Vec<f64> {
        self.0.clean_labels().to_vec()
    }

    #[getter]
    fn noisy(&self) -> Vec<bool> {
        self.0.noisy_mask().to_vec()
    }

    /// Cluster codes `+m1`, `-m1`, `+m2`, `-m2`.
    #[getter]
    fn clusters(&self) -> Vec<&'static str> {
        self.0.cluster_of().iter().map(|c| c.code()).collect()
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_csv(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        distribution::Dataset::load_csv(&path).map(PyDataset).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }
}

#[pyclass(name = "Network", frozen)]
struct PyNetwork(xorgd::NetworkParams);

#[pymethods]
impl PyNetwork {
    /// Gaussian initialization with standard deviation `omega_init`.
    #[staticmethod]
    #[pyo3(signature = (m, d, omega_init, seed, subgrad_at_zero = 0.0))]
    fn init(m: usize, d: usize, omega_init: f64, seed: u64, subgrad_at_zero: f64) -> PyResult<Self> {
        xorgd::init_network(m, d, omega_init, subgrad_at_zero, seed)
            .map(PyNetwork)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (w, subgrad_at_zero = 0.0))]
    fn from_weights(w: Vec<Vec<f64>>, subgrad_at_zero: f64) -> PyResult<Self> {
        xorgd::NetworkParams::from_weights(matrix(w)?, subgrad_at_zero)
            .map(PyNetwork)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load_checkpoint(path: PathBuf) -> PyResult<Self> {
        xorgd::NetworkParams::load_checkpoint(&path)
            .map(|(p, _)| PyNetwork(p))
            .map_err(to_py)
    }

    fn save_checkpoint(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_checkpoint(&path, None).map_err(to_py)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    #[getter]
    fn w(&self) -> Vec<Vec<f64>> {
        rows(self.0.w())
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.0.a().to_vec()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.forward(&x).map_err(to_py)
    }

    fn forward_batch(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let pts = matrix(points)?;
        self.0.forward_batch(pts.view()).map(|o| o.to_vec()).map_err(to_py)
    }

    fn empirical_risk(&self, dataset: &PyDataset) -> PyResult<f64> {
        trainer::empirical_risk(&self.0, &dataset.0).map_err(to_py)
    }

    fn gradient(&self, dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        trainer::gradient(&self.0, &dataset.0).map(|g| rows(&g)).map_err(to_py)
    }

    fn step(&self, dataset: &PyDataset, alpha: f64) -> PyResult<Self> {
        trainer::gd_step(&self.0, &dataset.0, alpha).map(PyNetwork).map_err(to_py)
    }
}

/// Result of `train`: the final network and one record per iteration.
#[pyclass(name = "TrainResult", frozen)]
struct PyTrainResult {
    trace: xorgd::TrainTrace,
}

#[pymethods]
impl PyTrainResult {
    #[getter]
    fn network(&self) -> PyNetwork {
        PyNetwork(self.trace.last().clone())
    }

    #[getter]
    fn initial(&self) -> PyNetwork {
        PyNetwork(self.trace.initial().clone())
    }

    /// JSON array of `{t, empirical_risk, clean_acc, noisy_acc, frob_norm,
    /// max_neuron_norm}`.
    fn records_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.trace.records).map_err(json_err)
    }

    fn trace_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.trace.write_csv(&mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Full-batch gradient descent; `iterations=None` uses the theorem schedule.
#[pyfunction]
#[pyo3(signature = (dataset, m, alpha, omega_init, seed, iterations = None, subgrad_at_zero = 0.0))]
fn train(
    dataset: &PyDataset,
    m: usize,
    alpha: f64,
    omega_init: f64,
    seed: u64,
    iterations: Option<usize>,
    subgrad_at_zero: f64,
) -> PyResult<PyTrainResult> {
    let iterations = match iterations {
        Some(t) => t,
        None => trainer::theorem_schedule(alpha).map_err(to_py)?,
    };
    let cfg = TrainConfig {
        alpha,
        iterations,
        omega_init,
        subgrad_at_zero,
        snapshot_policy: SnapshotPolicy::Endpoints,
        seed,
    };
    trainer::train(&dataset.0, m, &cfg, None)
        .map(|trace| PyTrainResult { trace })
        .map_err(to_py)
}

#[pyfunction]
fn theorem_schedule(alpha: f64) -> PyResult<usize> {
    trainer::theorem_schedule(alpha).map_err(to_py)
}

/// `{"+m1": [...], "-m1": [...], "+m2": [...], "-m2": [...]}` as JSON.
#[pyfunction]
#[pyo3(signature = (params0, spec, c0 = None))]
fn candidate_sets(params0: &PyNetwork, spec: &PySpec, c0: Option<f64>) -> PyResult<String> {
    let mut cfg = DiagnosticsConfig::default();
    if let Some(c0) = c0 {
        cfg.c0 = c0;
    }
    let sets = diagnostics::candidate_sets(&params0.0, &spec.0, &cfg).map_err(to_py)?;
    let map: serde_json::Map<String, serde_json::Value> = xorgd::Cluster::ALL
        .iter()
        .map(|c| (c.code().to_string(), serde_json::json!(sets.get(*c))))
        .collect();
    Ok(serde_json::Value::Object(map).to_string())
}

/// Full diagnostics of `params` at iteration `t` as JSON.
#[pyfunction]
#[pyo3(signature = (params0, params, spec, dataset, t, n_test = 0, test_seed = 0))]
fn diagnose(
    params0: &PyNetwork,
    params: &PyNetwork,
    spec: &PySpec,
    dataset: &PyDataset,
    t: usize,
    n_test: usize,
    test_seed: u64,
) -> PyResult<String> {
    let cfg = DiagnosticsConfig::default();
    let jsets = diagnostics::candidate_sets(&params0.0, &spec.0, &cfg).map_err(to_py)?;
    let ctx = diagnostics::DiagnosticContext {
        spec: &spec.0,
        train: &dataset.0,
        params0: &params0.0,
        jsets: &jsets,
        recorder: None,
        test: (n_test > 0).then_some((n_test, test_seed)),
        cfg: &cfg,
    };
    let report = ctx.evaluate(t, &params.0).map_err(to_py)?;
    serde_json::to_string(&report.summary()).map_err(json_err)
}

/// `(error, standard error)` of `sgn f` on fresh samples.
#[pyfunction]
fn test_error(params: &PyNetwork, spec: &PySpec, n_test: usize, seed: u64) -> PyResult<(f64, f64)> {
    diagnostics::test_error(&params.0, &spec.0, n_test, seed)
        .map(|e| (e.error, e.std_err))
        .map_err(to_py)
}

#[pyfunction]
fn reference_error(spec: &PySpec, n_test: usize, seed: u64) -> PyResult<(f64, f64)> {
    diagnostics::reference_error(&spec.0, n_test, seed)
        .map(|e| (e.error, e.std_err))
        .map_err(to_py)
}

#[pyfunction]
fn reference_network(spec: &PySpec) -> PyResult<PyNetwork> {
    diagnostics::reference_network(&spec.0).map(PyNetwork).map_err(to_py)
}

#[pyfunction]
fn ramp_risk(params: &PyNetwork, dataset: &PyDataset, gamma: f64) -> PyResult<f64> {
    diagnostics::ramp_risk(&params.0, &dataset.0, gamma).map_err(to_py)
}

#[pyfunction]
fn generalization_bound(gamma: f64, n: usize, delta: f64, empirical_ramp_risk: f64) -> PyResult<f64> {
    diagnostics::generalization_bound(gamma, n, delta, empirical_ramp_risk).map_err(to_py)
}

#[pyfunction]
fn feature_displacement(params0: &PyNetwork, params: &PyNetwork, dataset: &PyDataset) -> PyResult<Vec<f64>> {
    diagnostics::feature_displacement(&params0.0, &params.0, &dataset.0)
        .map(|r| r.ratios)
        .map_err(to_py)
}

/// Preset config as JSON.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    lab::preset(name).and_then(|c| c.to_json_pretty()).map_err(to_py)
}

/// Runs an experiment config (JSON) and returns the summary as JSON.
#[pyfunction]
fn run_experiment(config_json: &str, out: PathBuf) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let artifacts = lab::run(&cfg, &out).map_err(to_py)?;
    serde_json::to_string(&artifacts.summary).map_err(json_err)
}

#[pymodule]
#[pyo3(name = "xorgd")]
fn xorgd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(candidate_sets, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(test_error, m)?)?;
    m.add_function(wrap_pyfunction!(reference_error, m)?)?;
    m.add_function(wrap_pyfunction!(reference_network, m)?)?;
    m.add_function(wrap_pyfunction!(ramp_risk, m)?)?;
    m.add_function(wrap_pyfunction!(generalization_bound, m)?)?;
    m.add_function(wrap_pyfunction!(feature_displacement, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
