//! Python bindings. Structured results cross the boundary as plain Python
//! dicts and lists with the same layout as the JSON API.

use std::sync::Arc;

use erms_core::evolution::{project as project_steps, transition_matrix_for_level};
use erms_core::session::{read_jsonl, write_jsonl, EventKind, ScenarioCatalog, Session as CoreSession};
use erms_core::{
    aggregate, builtin_desk_alarm, builtin_gas_compressor, load_scenario, AggregateState, DiscreteDistribution,
    Evidence, FramingConstraints, Heuristic, LeakBelief, ScenarioBundle,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn aggregate_of(probs: Vec<f64>) -> PyResult<DiscreteDistribution> {
    DiscreteDistribution::new(AggregateState::labels(), probs).map_err(err)
}

/// A validated scenario bundle.
#[pyclass(frozen, skip_from_py_object, module = "erms")]
#[derive(Clone)]
pub struct Scenario {
    inner: Arc<ScenarioBundle>,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn gas_compressor() -> Self {
        Self { inner: Arc::new(builtin_gas_compressor()) }
    }

    #[staticmethod]
    fn desk_alarm() -> Self {
        Self { inner: Arc::new(builtin_desk_alarm()) }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let bundle = load_scenario(text.as_bytes()).map_err(err)?;
        Ok(Self { inner: Arc::new(bundle) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(err)?;
        let bundle = load_scenario(file).map_err(err)?;
        Ok(Self { inner: Arc::new(bundle) })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn levels(&self) -> Vec<String> {
        self.inner.transitions.levels.iter().map(|l| l.name.clone()).collect()
    }

    #[getter]
    fn tests(&self) -> Vec<String> {
        self.inner.tests.iter().map(|t| t.id.clone()).collect()
    }

    #[getter]
    fn horizons(&self) -> Vec<f64> {
        self.inner.value.horizons.clone()
    }

    #[getter]
    fn ignition_loss(&self) -> f64 {
        self.inner.value.ignition_loss
    }

    /// Copy with a different ignition loss.
    fn with_ignition_loss(&self, loss: f64) -> PyResult<Self> {
        let mut bundle = (*self.inner).clone();
        bundle.value.ignition_loss = loss;
        bundle.validate().map_err(err)?;
        Ok(Self { inner: Arc::new(bundle) })
    }

    fn __repr__(&self) -> String {
        format!("Scenario(id={:?})", self.inner.id)
    }
}

/// Posterior of `query` given `evidence` (a dict node -> outcome).
#[pyfunction]
#[pyo3(signature = (scenario, query, evidence=None))]
fn posterior<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    query: &str,
    evidence: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let evidence: Evidence = evidence.map(from_py).transpose()?.unwrap_or_default();
    let d = erms_core::posterior(&scenario.inner.network, &evidence, query).map_err(err)?;
    to_py(py, &d)
}

/// Real-state posterior and its aggregate over (none, progressive, catastrophic).
#[pyfunction]
#[pyo3(signature = (scenario, evidence=None))]
fn diagnose<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    evidence: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let b = &scenario.inner;
    let evidence: Evidence = evidence.map(from_py).transpose()?.unwrap_or_default();
    let detailed = erms_core::posterior(&b.network, &evidence, &b.network.real_state_node).map_err(err)?;
    let agg = aggregate(&detailed, &b.aggregation).map_err(err)?;
    to_py(py, &serde_json::json!({ "detailed": detailed, "aggregate": agg }))
}

#[pyfunction]
#[pyo3(signature = (scenario, diagnosis, horizon, delay=0.0, status_quo_level=0))]
fn recommend<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    diagnosis: Vec<f64>,
    horizon: f64,
    delay: f64,
    status_quo_level: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let d = aggregate_of(diagnosis)?;
    let rec = erms_core::recommend(&d, delay, status_quo_level, horizon, &scenario.inner).map_err(err)?;
    to_py(py, &rec)
}

#[pyfunction]
#[pyo3(signature = (scenario, diagnosis, delay=0.0, status_quo_level=0))]
fn escalating_recommend<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    diagnosis: Vec<f64>,
    delay: f64,
    status_quo_level: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let d = aggregate_of(diagnosis)?;
    let rec = erms_core::escalating_recommend(&d, delay, status_quo_level, &scenario.inner).map_err(err)?;
    to_py(py, &rec)
}

#[pyfunction]
#[pyo3(signature = (scenario, diagnosis, status_quo_level=0, constraints=None, heuristic="highest-ev-path"))]
fn build_plan<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    diagnosis: Vec<f64>,
    status_quo_level: usize,
    constraints: Option<&Bound<'py, PyAny>>,
    heuristic: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let d = aggregate_of(diagnosis)?;
    let constraints: FramingConstraints = match constraints {
        Some(c) => from_py(c)?,
        None => scenario.inner.constraints_default.clone(),
    };
    let heuristic: Heuristic = heuristic.parse().map_err(err)?;
    let inner = scenario.inner.clone();
    let plan = py
        .detach(move || erms_core::build_plan(&inner, &d, status_quo_level, &constraints, heuristic))
        .map_err(err)?;
    to_py(py, &plan)
}

/// Four-state belief after `steps` Markov steps under `level`.
#[pyfunction]
fn project(scenario: &Scenario, belief: [f64; 4], level: usize, steps: u64) -> PyResult<[f64; 4]> {
    let belief = LeakBelief::new(belief).map_err(err)?;
    let m = transition_matrix_for_level(&scenario.inner.transitions, level).map_err(err)?;
    Ok(project_steps(&belief, &m, steps).0)
}

#[pyfunction]
#[pyo3(signature = (scenario, aggregate, ignition_evident=false))]
fn classify_severity(scenario: &Scenario, aggregate: Vec<f64>, ignition_evident: bool) -> PyResult<String> {
    let d = aggregate_of(aggregate)?;
    Ok(erms_core::classify_severity(&d, ignition_evident, &scenario.inner.value.severity).to_string())
}

/// Monte Carlo ignition profiles as CSV text.
#[pyfunction]
#[pyo3(signature = (scenario, belief, steps, trajectories, seed=0))]
fn simulate(py: Python<'_>, scenario: &Scenario, belief: [f64; 4], steps: u64, trajectories: u64, seed: u64) -> PyResult<String> {
    let belief = LeakBelief::new(belief).map_err(err)?;
    let inner = scenario.inner.clone();
    let sim = py
        .detach(move || erms_core::simulate(&inner, &belief, steps, trajectories, seed))
        .map_err(err)?;
    let mut out = Vec::new();
    sim.write_csv(&mut out).map_err(err)?;
    String::from_utf8(out).map_err(err)
}

/// An event-sourced operator session.
#[pyclass(module = "erms")]
pub struct Session {
    inner: CoreSession,
}

impl Session {
    fn record(&mut self, kind: EventKind) -> PyResult<u64> {
        Ok(self.inner.record(kind).map_err(err)?.seq)
    }
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (scenario, status_quo_level=0, id="session"))]
    fn new(scenario: &Scenario, status_quo_level: usize, id: &str) -> PyResult<Self> {
        let inner = CoreSession::create(id, scenario.inner.clone(), status_quo_level).map_err(err)?;
        Ok(Self { inner })
    }

    /// Rebuilds a session from JSONL log text.
    #[staticmethod]
    #[pyo3(signature = (scenario, log, id="session"))]
    fn from_log(scenario: &Scenario, log: &str, id: &str) -> PyResult<Self> {
        let events = read_jsonl(log.as_bytes()).map_err(err)?;
        let mut catalog = ScenarioCatalog::new();
        catalog.insert((*scenario.inner).clone());
        let inner = CoreSession::from_events(id, events, &catalog).map_err(err)?;
        Ok(Self { inner })
    }

    fn observe(&mut self, node: String, outcome: String) -> PyResult<u64> {
        self.record(EventKind::Observation { node, outcome })
    }

    fn record_test(&mut self, test_id: String, outcome: String) -> PyResult<u64> {
        self.record(EventKind::TestResult { test_id, outcome })
    }

    fn advance(&mut self, dt: f64) -> PyResult<u64> {
        self.record(EventKind::TimeAdvance { dt })
    }

    fn set_level(&mut self, level: usize) -> PyResult<u64> {
        self.record(EventKind::LevelSet { level })
    }

    fn report_ignition(&mut self) -> PyResult<u64> {
        self.record(EventKind::IgnitionReported)
    }

    #[getter]
    fn seq(&self) -> u64 {
        self.inner.state().last_seq
    }

    #[getter]
    fn clock(&self) -> f64 {
        self.inner.state().clock
    }

    fn diagnosis<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.diagnosis())
    }

    fn recommendation<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.recommendation().map_err(err)?)
    }

    #[pyo3(signature = (constraints=None, heuristic="highest-ev-path"))]
    fn plan<'py>(
        &self,
        py: Python<'py>,
        constraints: Option<&Bound<'py, PyAny>>,
        heuristic: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let constraints: Option<FramingConstraints> = constraints.map(from_py).transpose()?;
        let heuristic: Heuristic = heuristic.parse().map_err(err)?;
        let plan = self.inner.plan(constraints.as_ref(), heuristic).map_err(err)?;
        to_py(py, &plan)
    }

    fn profile<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.profile())
    }

    /// The event log as JSONL text.
    fn log(&self) -> PyResult<String> {
        let mut out = Vec::new();
        write_jsonl(&mut out, self.inner.events()).map_err(err)?;
        String::from_utf8(out).map_err(err)
    }

    /// Serialized replayed state; equal logs give equal strings.
    fn state_json(&self) -> String {
        self.inner.state().to_json()
    }
}

#[pymodule]
fn erms(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(posterior, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(escalating_recommend, m)?)?;
    m.add_function(wrap_pyfunction!(build_plan, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(classify_severity, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
