//! Python module `aoi_tandem`: scenarios, the analytic report, simulation
//! and sweeps. Reports come back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;
use serde_json::Value;

use aoi_tandem::analysis::{self, AnalysisError, QuadratureSettings};
use aoi_tandem::des::{self, SimConfig, TraceRetention};
use aoi_tandem::harness::{self, HarnessError, SweepOptions, SweepSpec};
use aoi_tandem::model::{self, Scenario};

create_exception!(aoi_tandem, UnstableError, PyException);

fn analysis_err(e: AnalysisError) -> PyErr {
    if e.is_instability() {
        UnstableError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Analysis(a) => analysis_err(a),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// A validated scenario.
#[pyclass(name = "Scenario", module = "aoi_tandem", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Scenario::from_json_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Scenario::load(path)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn label(&self) -> &str {
        &self.inner.label
    }

    #[getter]
    fn num_sources(&self) -> usize {
        self.inner.num_sources()
    }

    /// Copy with `lambda_j = multipliers[j] * lambda_b`.
    fn with_base_rate(&self, lambda_b: f64, multipliers: Vec<f64>) -> PyResult<Self> {
        if multipliers.len() != self.inner.num_sources() {
            return Err(PyValueError::new_err("one multiplier per source required"));
        }
        model::validate_scenario(self.inner.with_base_rate(lambda_b, &multipliers))
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn load_summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &model::load_summary(&self.inner))
    }

    fn mean_snr(&self) -> f64 {
        model::mean_snr(&self.inner.channel)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(label={:?}, sources={})",
            self.inner.label,
            self.inner.num_sources()
        )
    }
}

/// Full analytic report as a dict. Raises `UnstableError` on instability.
#[pyfunction]
fn analytic_report<'py>(py: Python<'py>, scenario: &PyScenario) -> PyResult<Bound<'py, PyAny>> {
    let report =
        analysis::analytic_report(&scenario.inner, &QuadratureSettings::default()).map_err(analysis_err)?;
    to_py(py, &report)
}

/// `E[Z_j^T]` for 1-based `priority`.
#[pyfunction]
fn expected_transmission_time(scenario: &PyScenario, priority: usize) -> PyResult<f64> {
    if !(1..=scenario.inner.num_sources()).contains(&priority) {
        return Err(PyValueError::new_err("priority out of range"));
    }
    analysis::expected_transmission_time(priority, &scenario.inner, &QuadratureSettings::default())
        .map_err(analysis_err)
}

/// Monte-Carlo `(mean, std_error)` of the floored transmission time.
#[pyfunction]
#[pyo3(signature = (scenario, processed_bits, n_draws = 1_000_000, seed = 0))]
fn mc_transmission_oracle(
    scenario: &PyScenario,
    processed_bits: f64,
    n_draws: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    if n_draws < analysis::MIN_ORACLE_DRAWS {
        return Err(PyValueError::new_err(format!(
            "n_draws must be >= {}",
            analysis::MIN_ORACLE_DRAWS
        )));
    }
    let e = analysis::mc_transmission_oracle(processed_bits, &scenario.inner.channel, n_draws, seed);
    Ok((e.mean, e.std_error))
}

/// Runs the simulator; returns `{"report": {...}, "trace": [...] | None}`.
#[pyfunction]
#[pyo3(signature = (scenario, seed = 0, n_packets = 1_000_000, warmup = 0.05, trace = false))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    seed: u64,
    n_packets: u64,
    warmup: f64,
    trace: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SimConfig {
        seed,
        n_packets,
        warmup_fraction: warmup,
        trace_retention: if trace {
            TraceRetention::Full
        } else {
            TraceRetention::None
        },
    };
    let sc = scenario.inner.clone();
    let out = py
        .detach(move || des::run(&sc, &cfg))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let dict = PyDict::new(py);
    dict.set_item("report", to_py(py, &out.report)?)?;
    dict.set_item("trace", to_py(py, &out.trace)?)?;
    Ok(dict.into_any())
}

/// Sweeps `lambda_b`; returns the sweep table plus per-source argmins.
#[pyfunction]
#[pyo3(signature = (scenario, start, stop, steps, multipliers = None, seed = 0, n_packets = 1_000_000, analytic_only = false))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    start: f64,
    stop: f64,
    steps: usize,
    multipliers: Option<Vec<f64>>,
    seed: u64,
    n_packets: u64,
    analytic_only: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let j = scenario.inner.num_sources();
    let spec = SweepSpec {
        from: start,
        to: stop,
        steps,
        multipliers: multipliers.unwrap_or_else(|| (1..=j).map(|m| m as f64).collect()),
    };
    let opts = SweepOptions {
        seed,
        n_packets,
        analytic_only,
        ..SweepOptions::default()
    };
    let sc = scenario.inner.clone();
    let table = py
        .detach(move || harness::sweep(&sc, &spec, &opts))
        .map_err(harness_err)?;
    let dict = PyDict::new(py);
    dict.set_item("rows", to_py(py, &table.rows)?)?;
    dict.set_item("argmin_analytic", to_py(py, &table.argmin_analytic())?)?;
    dict.set_item("argmin_simulated", to_py(py, &table.argmin_simulated())?)?;
    Ok(dict.into_any())
}

#[pymodule]
#[pyo3(name = "aoi_tandem")]
fn aoi_tandem_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add("UnstableError", m.py().get_type::<UnstableError>())?;
    m.add_function(wrap_pyfunction!(analytic_report, m)?)?;
    m.add_function(wrap_pyfunction!(expected_transmission_time, m)?)?;
    m.add_function(wrap_pyfunction!(mc_transmission_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
