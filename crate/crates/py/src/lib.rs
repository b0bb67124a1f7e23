//! Python bindings. Structured results cross the boundary as plain
//! dicts and lists (serialized through JSON).

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use surgact::evaluation::{aggregate, GroupKey};
use surgact::experiment::{self, ExperimentConfig};
use surgact::seqmodel::ModelConfig;
use surgact::workflow::{self, MaskConfig};
use surgact::{synthgen, Error};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A set of annotated interventions with its vocabulary.
#[pyclass(name = "Dataset", module = "surgact_py")]
struct PyDataset {
    inner: workflow::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Synthetic dataset from a preset name (e.g. "LDH.R", "CS").
    #[staticmethod]
    #[pyo3(signature = (preset, seed=None))]
    fn generate(preset: &str, seed: Option<u64>) -> PyResult<Self> {
        let mut spec = synthgen::preset(preset).map_err(err)?;
        if let Some(s) = seed {
            spec.seed = s;
        }
        Ok(PyDataset { inner: synthgen::generate_dataset(&spec).map_err(err)? })
    }

    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: workflow::load_dataset(&manifest).map_err(err)? })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        workflow::save_dataset(&self.inner, &dir).map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    fn __len__(&self) -> usize {
        self.inner.interventions.len()
    }

    fn intervention_ids(&self) -> Vec<String> {
        self.inner.interventions.iter().map(|iv| iv.id.clone()).collect()
    }

    /// Activities of one intervention as `(labels, t_start, t_end)`, labels
    /// ordered lv, li, ls, rv, ri, rs.
    fn activities(&self, id: &str) -> PyResult<Vec<(Vec<String>, f64, f64)>> {
        let iv = self
            .inner
            .intervention(id)
            .ok_or_else(|| PyValueError::new_err(format!("no intervention `{id}`")))?;
        let v = &self.inner.vocab;
        Ok(iv
            .activities
            .iter()
            .map(|a| {
                let labels = (0..workflow::POSITIONS).map(|p| v.label(p, a.items[p]).to_owned()).collect();
                (labels, a.t_start, a.t_end)
            })
            .collect())
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &workflow::dataset_stats(&self.inner).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Dataset(name={:?}, interventions={})", self.inner.name, self.inner.interventions.len())
    }
}

/// Visibility bits (lv li ls rv ri rs) of a configuration name such as "IS".
#[pyfunction]
fn mask_bits(name: &str) -> PyResult<String> {
    name.parse::<MaskConfig>().map(|m| m.bits()).map_err(err)
}

/// Maximum relative error between analytic and finite-difference gradients.
#[pyfunction]
#[pyo3(signature = (layers=2, hidden=8, window=5, classes=10, input_dim=12, seed=0))]
fn gradient_check(
    layers: usize,
    hidden: usize,
    window: usize,
    classes: usize,
    input_dim: usize,
    seed: u64,
) -> PyResult<f64> {
    let cfg = ModelConfig {
        layers,
        hidden,
        window_n: window,
        n_classes: classes,
        input_dim,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    };
    surgact::seqmodel::gradient_check(&cfg, seed).map_err(err)
}

#[pyfunction]
fn wilcoxon_signed_rank<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &surgact::evaluation::wilcoxon_signed_rank(&x, &y).map_err(err)?)
}

#[pyfunction]
fn spearman_rho<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &surgact::evaluation::spearman_rho(&x, &y).map_err(err)?)
}

/// Runs an experiment from TOML text and returns per-condition summary
/// rows; with `out_dir` the full report is written as well.
#[pyfunction]
#[pyo3(signature = (config_toml, out_dir=None))]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str, out_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    let d = cfg.resolve_dataset().map_err(err)?;
    let report = py.detach(|| experiment::run_on(&cfg, &d)).map_err(err)?;
    if let Some(dir) = out_dir {
        experiment::write_report(&report, Some(&d), &dir).map_err(err)?;
    }
    let keys = [GroupKey::Config, GroupKey::NoiseKind, GroupKey::Rate, GroupKey::Delay];
    to_py(py, &aggregate(&report.records, &keys).map_err(err)?)
}

#[pymodule]
fn surgact_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(mask_bits, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
