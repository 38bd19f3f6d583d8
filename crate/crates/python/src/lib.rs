//! Python bindings: configuration, end-to-end runs and the core estimators.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use pmfuse::config::Config;
use pmfuse::conflate::{cgasm, gasm, Quantity, SmoothingParams, VdsSeries};
use pmfuse::field::{FieldKind, SpaceTimeField};
use pmfuse::measures::{Method, Totals};
use pmfuse::pipeline::{self, RunResult};
use pmfuse::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Input { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_method(name: &str) -> PyResult<Method> {
    Method::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown method `{name}`")))
}

/// Run configuration; `toml` text is parsed with `PMFUSE_*` overrides applied.
#[pyclass(name = "Config", frozen)]
pub struct PyConfig {
    inner: Config,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = Config::parse(toml.unwrap_or(""), std::env::vars()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Config::load(&path).map_err(to_py)?,
        })
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash.clone()
    }

    #[getter]
    fn scenarios(&self) -> Vec<String> {
        self.inner.scenarios.iter().map(|s| s.name.clone()).collect()
    }

    fn seeds(&self, scenario: &str) -> PyResult<Vec<u64>> {
        self.inner
            .scenario(scenario)
            .map(|s| s.seeds.clone())
            .ok_or_else(|| PyValueError::new_err(format!("unknown scenario `{scenario}`")))
    }
}

#[pyclass(name = "Totals", frozen, get_all, skip_from_py_object)]
#[derive(Debug, Clone, Copy)]
pub struct PyTotals {
    vmt: f64,
    vht: f64,
    vhd: f64,
}

impl From<Totals> for PyTotals {
    fn from(t: Totals) -> Self {
        Self {
            vmt: t.vmt,
            vht: t.vht,
            vhd: t.vhd,
        }
    }
}

impl From<&PyTotals> for Totals {
    fn from(t: &PyTotals) -> Self {
        Totals {
            vmt: t.vmt,
            vht: t.vht,
            vhd: t.vhd,
        }
    }
}

#[pymethods]
impl PyTotals {
    #[new]
    fn new(vmt: f64, vht: f64, vhd: f64) -> Self {
        Self { vmt, vht, vhd }
    }

    fn __repr__(&self) -> String {
        format!("Totals(vmt={:.2}, vht={:.2}, vhd={:.2})", self.vmt, self.vht, self.vhd)
    }
}

/// Outcome of one simulated scenario and seed.
#[pyclass(name = "RunResult", frozen)]
pub struct PyRunResult {
    inner: RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn scenario(&self) -> String {
        self.inner.scenario.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn g_factors(&self) -> Vec<f64> {
        self.inner.g_factors.as_slice().to_vec()
    }

    #[getter]
    fn detector_speed_mae(&self) -> Option<f64> {
        self.inner.detector_speed_error.map(|e| e.mae)
    }

    /// Totals of `ground_truth`, `traditional` or `hybrid`.
    fn totals(&self, method: &str) -> PyResult<PyTotals> {
        Ok(self.inner.report(parse_method(method)?).totals.into())
    }

    /// Flow MAPE (percent) of `gasm` or `cgasm` at the cell boundaries.
    fn flow_mape(&self, method: &str) -> PyResult<Option<f64>> {
        let f = match method {
            "gasm" => &self.inner.gasm,
            "cgasm" => &self.inner.cgasm,
            _ => return Err(PyValueError::new_err(format!("unknown conflation method `{method}`"))),
        };
        Ok(f.flow_error.map(|e| e.mape))
    }
}

/// Simulates one scenario and seed and evaluates both methods.
#[pyfunction]
fn run(py: Python<'_>, config: &PyConfig, scenario: &str, seed: u64) -> PyResult<PyRunResult> {
    let cfg = &config.inner;
    let spec = cfg
        .scenario(scenario)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scenario `{scenario}`")))?;
    let (_, inner) = py.detach(|| pipeline::run(cfg, spec, seed)).map_err(to_py)?;
    Ok(PyRunResult { inner })
}

/// Percentage-point improvement of hybrid over traditional as `(vmt, vht, vhd)`.
#[pyfunction]
fn improvement(traditional: &PyTotals, hybrid: &PyTotals, truth: &PyTotals) -> (Option<f64>, Option<f64>, Option<f64>) {
    let i = pmfuse::measures::improvement(&traditional.into(), &hybrid.into(), &truth.into());
    (i.vmt, i.vht, i.vhd)
}

/// Loop speed in mph from g (ft), count and occupancy over one interval.
#[pyfunction]
#[pyo3(signature = (g_ft, count, occupancy, step_seconds = 60.0))]
fn loop_speed(g_ft: f64, count: f64, occupancy: f64, step_seconds: f64) -> PyResult<f64> {
    pmfuse::detector::preliminary_speed(g_ft, count, occupancy, step_seconds).map_err(to_py)
}

/// Splits a link travel time over its parts in proportion to vehicle counts.
#[pyfunction]
fn distribute_link_tt(tt: f64, counts: Vec<Option<f64>>, lengths: Vec<f64>) -> PyResult<Vec<f64>> {
    if counts.len() != lengths.len() {
        return Err(PyValueError::new_err("counts and lengths differ in length"));
    }
    Ok(pmfuse::ttfuse::distribute_link_tt(tt, &counts, &lengths).part_tt)
}

/// Reconstructs `quantity` at `targets` (mi) from station series
/// `[station][interval]` with the default smoothing parameters.
#[pyfunction]
#[pyo3(signature = (positions, flow, speed, targets, quantity = "flow", method = "cgasm", step_minutes = 1.0))]
fn smooth(
    positions: Vec<f64>,
    flow: Vec<Vec<Option<f64>>>,
    speed: Vec<Vec<Option<f64>>>,
    targets: Vec<f64>,
    quantity: &str,
    method: &str,
    step_minutes: f64,
) -> PyResult<Vec<Vec<Option<f64>>>> {
    let q = match quantity {
        "flow" => Quantity::Flow,
        "speed" => Quantity::Speed,
        "density" => Quantity::Density,
        _ => return Err(PyValueError::new_err(format!("unknown quantity `{quantity}`"))),
    };
    let series = VdsSeries::new(
        positions,
        step_minutes,
        SpaceTimeField::from_rows(FieldKind::Flow, &flow),
        SpaceTimeField::from_rows(FieldKind::Speed, &speed),
    )
    .map_err(to_py)?;
    let p = SmoothingParams::default();
    let field = match method {
        "gasm" => gasm(&series, q, &targets, &p),
        "cgasm" => cgasm(&series, q, &targets, &p),
        _ => return Err(PyValueError::new_err(format!("unknown conflation method `{method}`"))),
    };
    Ok((0..field.n_points()).map(|k| field.row(k)).collect())
}

/// Adds the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTotals>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(improvement, m)?)?;
    m.add_function(wrap_pyfunction!(loop_speed, m)?)?;
    m.add_function(wrap_pyfunction!(distribute_link_tt, m)?)?;
    m.add_function(wrap_pyfunction!(smooth, m)?)?;
    Ok(())
}

#[pymodule]
fn pmfuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
