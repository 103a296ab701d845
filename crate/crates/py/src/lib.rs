//! Python bindings: dataset loading, metrics, the fairness penalty, the
//! oversampler, and the config-driven experiment runner.

use fedida::data::{
    eight_group_spec, generate_synthetic, load_csv, ColumnSchema, SubgroupIndex, TabularDataset,
};
use fedida::experiment::{cmd_run, ExperimentConfig};
use fedida::matrix::{CategoryMatrix, Matrix};
use fedida::metrics::{self, MetricConfig, MetricMode};
use fedida::penalty::{penalty_terms, PenaltyMode};
use fedida::rose::{fairness_aware_rose, RoseConfig, SmoothingRule, TargetRule};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err_py(e: fedida::Error) -> PyErr {
    match e {
        fedida::Error::Config(_) | fedida::Error::Schema(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyObject {
    match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py).unwrap().to_owned().unbind().into(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py).unwrap().unbind().into()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py).unwrap().unbind().into()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py).unwrap().unbind().into(),
        serde_json::Value::Array(items) => {
            let list = PyList::new(py, items.iter().map(|i| json_to_py(py, i))).unwrap();
            list.unbind().into()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)).unwrap();
            }
            dict.unbind().into()
        }
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(json_to_py(py, &v))
}

fn parse_mode(mode: &str) -> PyResult<MetricMode> {
    match mode {
        "hard" => Ok(MetricMode::Hard),
        "soft" => Ok(MetricMode::Soft),
        other => Err(PyValueError::new_err(format!("unknown metric mode '{other}'"))),
    }
}

fn parse_penalty_mode(mode: &str) -> PyResult<PenaltyMode> {
    match mode {
        "signed-ordered" => Ok(PenaltyMode::SignedOrdered),
        "absolute-pair" => Ok(PenaltyMode::AbsolutePair),
        "squared-group-mean" => Ok(PenaltyMode::SquaredGroupMean),
        other => Err(PyValueError::new_err(format!("unknown penalty mode '{other}'"))),
    }
}

/// A loaded tabular dataset with its subgroup structure.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: TabularDataset,
}

#[pymethods]
impl PyDataset {
    /// Load a CSV file against a JSON schema file.
    #[staticmethod]
    fn load_csv(path: &str, schema_path: &str) -> PyResult<Self> {
        let schema = ColumnSchema::from_json_file(schema_path).map_err(err_py)?;
        Ok(PyDataset { inner: load_csv(path, &schema).map_err(err_py)? })
    }

    /// The built-in eight-subgroup imbalanced synthetic dataset.
    #[staticmethod]
    fn synthetic(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: generate_synthetic(&eight_group_spec(n, seed)).map_err(err_py)?,
        })
    }

    /// Synthetic data from a full JSON spec string.
    #[staticmethod]
    fn synthetic_from_spec(spec_json: &str) -> PyResult<Self> {
        let spec = serde_json::from_str(spec_json)
            .map_err(|e| PyValueError::new_err(format!("bad spec: {e}")))?;
        Ok(PyDataset { inner: generate_synthetic(&spec).map_err(err_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p_a(&self) -> usize {
        self.inner.p_a()
    }

    #[getter]
    fn dropped_rows(&self) -> usize {
        self.inner.dropped_rows
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n()).map(|i| self.inner.a.row(i).to_vec()).collect()
    }

    fn sensitive(&self) -> Vec<Vec<u32>> {
        (0..self.inner.n()).map(|i| self.inner.sensitive_row(i).to_vec()).collect()
    }

    fn outcomes(&self) -> Vec<u8> {
        self.inner.y.clone()
    }

    /// Subgroup sizes keyed by the group label, optionally split by outcome.
    #[pyo3(signature = (by_outcome = false))]
    fn subgroup_sizes(&self, py: Python<'_>, by_outcome: bool) -> PyResult<PyObject> {
        let index = SubgroupIndex::build(&self.inner, by_outcome).map_err(err_py)?;
        let dict = PyDict::new(py);
        for (key, size) in index.keys().iter().zip(index.sizes()) {
            dict.set_item(key.to_string(), size)?;
        }
        Ok(dict.unbind().into())
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }
}

/// Mann-Whitney AUROC with midrank tie handling.
#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    metrics::auroc(&scores, &labels).map_err(err_py)
}

fn index_from(sensitive: Vec<Vec<u32>>, labels: &[u8]) -> PyResult<SubgroupIndex> {
    SubgroupIndex::from_rows(sensitive.iter().map(|r| r.as_slice()), labels, false)
        .map_err(err_py)
}

/// Full fairness report (AUROC, DPD, DPR, DFPR, DPPV, per-group rates).
#[pyfunction]
#[pyo3(signature = (scores, labels, sensitive, threshold = 0.5, min_group_size = 5, mode = "hard"))]
fn fairness_report(
    py: Python<'_>,
    scores: Vec<f64>,
    labels: Vec<u8>,
    sensitive: Vec<Vec<u32>>,
    threshold: f64,
    min_group_size: usize,
    mode: &str,
) -> PyResult<PyObject> {
    let index = index_from(sensitive, &labels)?;
    let cfg = MetricConfig { threshold, min_group_size, mode: parse_mode(mode)? };
    let report = metrics::evaluate(&scores, &labels, &index, &cfg).map_err(err_py)?;
    to_py(py, &report)
}

/// (DPD, DPR) for one score vector.
#[pyfunction]
#[pyo3(signature = (scores, labels, sensitive, threshold = 0.5, min_group_size = 5, mode = "hard"))]
fn demographic_parity(
    scores: Vec<f64>,
    labels: Vec<u8>,
    sensitive: Vec<Vec<u32>>,
    threshold: f64,
    min_group_size: usize,
    mode: &str,
) -> PyResult<(f64, f64)> {
    let index = index_from(sensitive, &labels)?;
    let cfg = MetricConfig { threshold, min_group_size, mode: parse_mode(mode)? };
    let (dpd, dpr, _) = metrics::demographic_parity(&scores, &index, &cfg).map_err(err_py)?;
    Ok((dpd, dpr))
}

/// Fairness penalty value over a batch of scores.
/// Returns (value, pair_count, normalizer).
#[pyfunction]
#[pyo3(signature = (scores, labels, groups, mode = "absolute-pair"))]
fn penalty(
    scores: Vec<f64>,
    labels: Vec<u8>,
    groups: Vec<u32>,
    mode: &str,
) -> PyResult<(f64, u64, f64)> {
    if scores.len() != labels.len() || scores.len() != groups.len() {
        return Err(PyValueError::new_err("scores, labels, groups must share a length"));
    }
    let (value, _) = penalty_terms(&scores, &labels, &groups, parse_penalty_mode(mode)?);
    Ok((value.value, value.pair_count, value.normalizer))
}

/// Subgroup-balancing oversampler over one batch.
/// Returns a dict with keys a, s, y, synthetic_mask.
#[pyfunction]
#[pyo3(signature = (a, s, y, n_target = None, smoothing = None, seed = 0))]
fn rose_augment(
    py: Python<'_>,
    a: Vec<Vec<f64>>,
    s: Vec<Vec<u32>>,
    y: Vec<u8>,
    n_target: Option<usize>,
    smoothing: Option<f64>,
    seed: u64,
) -> PyResult<PyObject> {
    if a.len() != s.len() || a.len() != y.len() {
        return Err(PyValueError::new_err("a, s, y must share a length"));
    }
    let cfg = RoseConfig {
        n_target: n_target.map_or(TargetRule::AutoMaxSubgroup, TargetRule::Fixed),
        smoothing: smoothing
            .map_or(SmoothingRule::Silverman { factor: 0.1 }, |h| SmoothingRule::Fixed { h }),
        seed,
        client_level: false,
    };
    let out = fairness_aware_rose(
        &Matrix::from_rows(a),
        &CategoryMatrix::from_rows(s),
        &y,
        &cfg,
    )
    .map_err(err_py)?;
    let dict = PyDict::new(py);
    dict.set_item(
        "a",
        (0..out.n()).map(|i| out.a.row(i).to_vec()).collect::<Vec<_>>(),
    )?;
    dict.set_item(
        "s",
        (0..out.n()).map(|i| out.s.row(i).to_vec()).collect::<Vec<_>>(),
    )?;
    dict.set_item("y", out.y.clone())?;
    dict.set_item("synthetic_mask", out.synthetic_mask.clone())?;
    Ok(dict.unbind().into())
}

/// Run a full experiment from a JSON config string; artifacts land in
/// `output_dir`. Returns the results table.
#[pyfunction]
#[pyo3(signature = (config_json, output_dir, seed = None))]
fn run_experiment(
    py: Python<'_>,
    config_json: &str,
    output_dir: &str,
    seed: Option<u64>,
) -> PyResult<PyObject> {
    let mut cfg: ExperimentConfig = serde_json::from_str(config_json)
        .map_err(|e| PyValueError::new_err(format!("bad config: {e}")))?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.federation.seed = s;
    }
    cfg.validate().map_err(err_py)?;
    let artifacts = cmd_run(&cfg, std::path::Path::new(output_dir)).map_err(err_py)?;
    to_py(py, &artifacts.table)
}

#[pymodule]
fn fedida_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(fairness_report, m)?)?;
    m.add_function(wrap_pyfunction!(demographic_parity, m)?)?;
    m.add_function(wrap_pyfunction!(penalty, m)?)?;
    m.add_function(wrap_pyfunction!(rose_augment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
