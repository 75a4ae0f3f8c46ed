//! Python bindings. Errors map to `ValueError` (bad arguments), `OSError`
//! (files), `ofdmim.InfeasibleError` and `RuntimeError` (numerical
//! failures).

use std::path::PathBuf;

use ofdmim_core::channel::{self, OutageMode, SubcarrierPower, SubcarrierStats};
use ofdmim_core::dataset::{self, GenerationParams, SampleMatrix};
use ofdmim_core::neural::{self, AdamConfig};
use ofdmim_core::oracle;
use ofdmim_core::training::{self, RepairMode, TrainingConfig};
use ofdmim_core::{im_mapping, ErrorKind};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(ofdmim, InfeasibleError, PyException, "The outage cap cannot be met at the power caps.");

fn py_err(e: ofdmim_core::Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Usage => PyValueError::new_err(msg),
        ErrorKind::Io => PyOSError::new_err(msg),
        ErrorKind::Infeasible => InfeasibleError::new_err(msg),
        ErrorKind::Numeric => PyRuntimeError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ofdmim_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "SystemConfig", module = "ofdmim", from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: oracle::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[new]
    #[pyo3(signature = (n=4, t=2, m=4, s=1.0, psi_th=1e-2, pt_max=5000.0, pr_max=5000.0, outage_mode="single-sap"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        t: usize,
        m: usize,
        s: f64,
        psi_th: f64,
        pt_max: f64,
        pr_max: f64,
        outage_mode: &str,
    ) -> PyResult<Self> {
        let outage_mode: OutageMode = outage_mode.parse().py()?;
        let inner = oracle::SystemConfig { n, t, m, s, psi_th, pt_max, pr_max, outage_mode };
        inner.validate().py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn t(&self) -> usize {
        self.inner.t
    }
    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }
    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }
    #[getter]
    fn psi_th(&self) -> f64 {
        self.inner.psi_th
    }
    #[getter]
    fn pt_max(&self) -> f64 {
        self.inner.pt_max
    }
    #[getter]
    fn pr_max(&self) -> f64 {
        self.inner.pr_max
    }
    #[getter]
    fn outage_mode(&self) -> String {
        self.inner.outage_mode.to_string()
    }

    /// Subcarriers that carry decision variables.
    fn decision_width(&self) -> usize {
        self.inner.decision_width()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SystemConfig(n={}, t={}, m={}, s={}, psi_th={}, pt_max={}, pr_max={}, outage_mode='{}')",
            c.n, c.t, c.m, c.s, c.psi_th, c.pt_max, c.pr_max, c.outage_mode
        )
    }
}

fn config_or_default(config: Option<PySystemConfig>) -> oracle::SystemConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

#[pyclass(name = "OracleResult", module = "ofdmim", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyOracleResult {
    pt: Vec<f64>,
    pr: Vec<f64>,
    total_power: f64,
    achieved_outage: f64,
    accuracy: f64,
    evaluations: u64,
    levels: usize,
}

impl From<oracle::OracleResult> for PyOracleResult {
    fn from(r: oracle::OracleResult) -> Self {
        Self {
            pt: r.allocation.pt,
            pr: r.allocation.pr,
            total_power: r.total_power,
            achieved_outage: r.achieved_outage,
            accuracy: r.accuracy,
            evaluations: r.evaluations,
            levels: r.levels,
        }
    }
}

#[pymethods]
impl PyOracleResult {
    fn __repr__(&self) -> String {
        format!("OracleResult(pt={:?}, pr={:?}, total_power={})", self.pt, self.pr, self.total_power)
    }
}

fn to_stats(stats: Vec<(f64, f64, f64, f64)>) -> PyResult<Vec<SubcarrierStats>> {
    stats
        .into_iter()
        .map(|(mu1, mu2, eta1, eta2)| SubcarrierStats::new(mu1, mu2, eta1, eta2))
        .collect::<ofdmim_core::Result<_>>()
        .py()
}

/// Modified Bessel function of the second kind, order one.
#[pyfunction]
fn bessel_k1(x: f64) -> PyResult<f64> {
    channel::bessel_k1(x).py()
}

/// Closed-form outage probability of one relayed subcarrier.
#[pyfunction]
#[pyo3(signature = (mu1, mu2, eta1, eta2, pt, pr, s=1.0))]
#[allow(clippy::too_many_arguments)]
fn subcarrier_outage(mu1: f64, mu2: f64, eta1: f64, eta2: f64, pt: f64, pr: f64, s: f64) -> PyResult<f64> {
    let stats = SubcarrierStats::new(mu1, mu2, eta1, eta2).py()?;
    channel::subcarrier_outage(&stats, SubcarrierPower::new(pt, pr).py()?, s).py()
}

/// Monte-Carlo outage estimate; returns `(p, standard_error)`.
#[pyfunction]
#[pyo3(signature = (mu1, mu2, eta1, eta2, pt, pr, s=1.0, trials=1_000_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo_outage(
    py: Python<'_>,
    mu1: f64,
    mu2: f64,
    eta1: f64,
    eta2: f64,
    pt: f64,
    pr: f64,
    s: f64,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let stats = SubcarrierStats::new(mu1, mu2, eta1, eta2).py()?;
    let power = SubcarrierPower::new(pt, pr).py()?;
    let est = py.detach(|| channel::monte_carlo_outage(&stats, power, s, trials, seed)).py()?;
    Ok((est.p, est.std_error))
}

#[pyfunction]
fn legitimate_sap_count(n: usize, t: usize) -> PyResult<u64> {
    im_mapping::legitimate_sap_count(n, t).py()
}

#[pyfunction]
fn bitstream_length(n: usize, t: usize, m: usize) -> PyResult<u32> {
    im_mapping::bitstream_length(n, t, m).py()
}

/// Minimum-power allocation for `stats`, a list of `(mu1, mu2, eta1, eta2)`
/// per decision subcarrier.
#[pyfunction]
#[pyo3(signature = (stats, config=None, delta=1e-2))]
fn solve(
    py: Python<'_>,
    stats: Vec<(f64, f64, f64, f64)>,
    config: Option<PySystemConfig>,
    delta: f64,
) -> PyResult<PyOracleResult> {
    let stats = to_stats(stats)?;
    let config = config_or_default(config);
    Ok(py.detach(|| oracle::solve(&stats, &config, delta)).py()?.into())
}

/// Flat enumeration of a lattice with `points` values per axis.
#[pyfunction]
#[pyo3(signature = (stats, config=None, points=6))]
fn brute_force(
    py: Python<'_>,
    stats: Vec<(f64, f64, f64, f64)>,
    config: Option<PySystemConfig>,
    points: usize,
) -> PyResult<PyOracleResult> {
    let stats = to_stats(stats)?;
    let config = config_or_default(config);
    Ok(py.detach(|| oracle::brute_force_reference(&stats, &config, points)).py()?.into())
}

#[pyclass(name = "Dataset", module = "ofdmim", skip_from_py_object)]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Draws `count` feasible samples and labels them with the oracle.
    #[staticmethod]
    #[pyo3(signature = (count, seed=0, delta=1e-2, range_lo=0.5, range_hi=5.0, config=None))]
    fn generate(
        py: Python<'_>,
        count: usize,
        seed: u64,
        delta: f64,
        range_lo: f64,
        range_hi: f64,
        config: Option<PySystemConfig>,
    ) -> PyResult<Self> {
        let config = config_or_default(config);
        let params = GenerationParams { count, range_lo, range_hi, seed, delta, grid_levels: None };
        let inner = py.detach(|| dataset::build_dataset(&params, &config)).py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: dataset::load_dataset(&path).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataset::save_dataset(&self.inner, &path).py()
    }

    /// Returns `(train, validation)`.
    fn split(&self, validation_count: usize, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = dataset::split(&self.inner, validation_count, seed).py()?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    #[getter]
    fn config(&self) -> PySystemConfig {
        PySystemConfig { inner: self.inner.config.clone() }
    }

    /// Sample matrices as lists of four rows.
    fn samples(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.records.iter().map(|r| r.sample.clone().into()).collect()
    }

    /// Labels as `(pt, pr)` pairs.
    fn labels(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.inner.records.iter().map(|r| (r.label.pt.clone(), r.label.pr.clone())).collect()
    }

    fn total_powers(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.total_power).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(records={}, delta={})", self.inner.len(), self.inner.gen.delta)
    }
}

#[pyclass(name = "Model", module = "ofdmim", skip_from_py_object)]
struct PyModel {
    inner: neural::Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: neural::Model::load(&path).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).py()
    }

    #[getter]
    fn layer_dims(&self) -> Vec<usize> {
        self.inner.params.layer_dims().to_vec()
    }

    /// Allocation `(pt, pr)` for one sample given as four rows.
    fn predict(&self, sample: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let sample = SampleMatrix::try_from(sample).py()?;
        let n = &self.inner.normalization;
        let x = neural::encode_input(&sample, n.range_hi).py()?;
        let raw = neural::forward(&self.inner.params, &x).py()?;
        let a = neural::decode_output(&raw, n.pt_max, n.pr_max).py()?;
        Ok((a.pt, a.pr))
    }

    /// Mean entrywise relative deviation from the dataset labels.
    fn relative_error(&self, data: &PyDataset) -> PyResult<f64> {
        Ok(training::relative_error(&self.inner.params, &data.inner, &self.inner.normalization).py()?.mean)
    }

    /// Total-power comparison with fresh oracle solves; returns the summary
    /// as a dict and the per-sample rows as a list of dicts.
    #[pyo3(signature = (data, delta=1e-2, repair="none"))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        data: &PyDataset,
        delta: f64,
        repair: &str,
    ) -> PyResult<(Bound<'py, PyDict>, Vec<Bound<'py, PyDict>>)> {
        let repair: RepairMode = repair.parse().py()?;
        let (params, norm, ds) = (&self.inner.params, &self.inner.normalization, &data.inner);
        let report = py.detach(|| training::compare_total_power(params, norm, ds, &ds.config, delta, repair)).py()?;
        let s = &report.summary;
        let summary = PyDict::new(py);
        summary.set_item("count", s.count)?;
        summary.set_item("mean_gap", s.mean_gap)?;
        summary.set_item("mean_abs_gap", s.mean_abs_gap)?;
        summary.set_item("violation_rate", s.violation_rate)?;
        summary.set_item("within_25_percent", s.within_25_percent)?;
        let rows = report
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("sample_id", r.sample_id)?;
                d.set_item("ann_total", r.ann_total)?;
                d.set_item("oracle_total", r.oracle_total)?;
                d.set_item("gap", r.gap)?;
                d.set_item("ann_outage", r.ann_outage)?;
                d.set_item("violated", r.violated)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok((summary, rows))
    }
}

/// `(epoch, loss, relative_error)` with no error when there is no validation set.
type HistoryRow = (usize, f64, Option<f64>);

/// Trains a sigmoid network; returns the model and the history as
/// `(epoch, loss, relative_error or None)` tuples.
#[pyfunction]
#[pyo3(signature = (
    data, validation=None, hidden_layers=2, neurons=64, epochs=10_000, batch_size=32, step_size=1e-4,
    init_seed=0, shuffle_seed=0, snapshot_every=100, use_bias=true
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data: &PyDataset,
    validation: Option<PyRef<'_, PyDataset>>,
    hidden_layers: usize,
    neurons: usize,
    epochs: usize,
    batch_size: usize,
    step_size: f64,
    init_seed: u64,
    shuffle_seed: u64,
    snapshot_every: usize,
    use_bias: bool,
) -> PyResult<(PyModel, Vec<HistoryRow>)> {
    let width = data.inner.config.decision_width();
    let mut dims = vec![4 * width];
    dims.extend(std::iter::repeat(neurons).take(hidden_layers));
    dims.push(2 * width);
    let params = neural::init_mlp(&dims, init_seed, use_bias).py()?;
    let norm = training::normalization_for(&data.inner);
    let config = TrainingConfig {
        epochs,
        batch_size,
        adam: AdamConfig { step_size, ..AdamConfig::default() },
        shuffle_seed,
        snapshot_every,
    };
    let validation = validation.as_ref().map(|v| &v.inner);
    let train_set = &data.inner;
    let (params, history) = py.detach(|| training::train(params, train_set, validation, &norm, &config)).py()?;
    let rows = history.snapshots.iter().map(|s| (s.epoch, s.loss, s.rel_error)).collect();
    Ok((PyModel { inner: neural::Model { params, normalization: norm } }, rows))
}

#[pymodule]
fn ofdmim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<PySystemConfig>()?;
    m.add_class::<PyOracleResult>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(bessel_k1, m)?)?;
    m.add_function(wrap_pyfunction!(subcarrier_outage, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_outage, m)?)?;
    m.add_function(wrap_pyfunction!(legitimate_sap_count, m)?)?;
    m.add_function(wrap_pyfunction!(bitstream_length, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
