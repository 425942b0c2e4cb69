//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists, built through the `json` module from the serde representation.

use std::path::PathBuf;
use std::str::FromStr;

use frost_hollow::agent::{AgentState, GvfParams};
use frost_hollow::env::{IsiCondition, PulseSchedule};
use frost_hollow::harness::export;
use frost_hollow::harness::trial::schedule_rng;
use frost_hollow::harness::{self as core_harness, AgentKind, Cell, Replay};
use frost_hollow::session::{self as core_session, ClientInput, SessionConfig};
use frost_hollow::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Format { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&s).map_err(value_err)
}

fn parse<T: FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(value_err)
}

fn config_or_default(config: Option<&ExperimentConfig>) -> core_harness::ExperimentConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Experiment configuration. Build from TOML text, a file or a dict.
#[pyclass(module = "frost_hollow")]
struct ExperimentConfig {
    inner: core_harness::ExperimentConfig,
}

#[pymethods]
impl ExperimentConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(s) => core_harness::ExperimentConfig::from_toml_str(s).map_err(value_err)?,
            None => core_harness::ExperimentConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core_harness::ExperimentConfig::load(&path).map(|inner| Self { inner }).map_err(core_err)
    }

    #[staticmethod]
    fn from_dict(d: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner: core_harness::ExperimentConfig = from_py(d)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig(hash={:?})", self.inner.hash())
    }
}

/// Inactive and active durations of every segment for a trial seed.
#[pyfunction]
#[pyo3(signature = (condition, seed, config = None))]
fn schedule<'py>(
    py: Python<'py>,
    condition: &str,
    seed: u64,
    config: Option<&ExperimentConfig>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_or_default(config);
    let sched = PulseSchedule::generate(parse::<IsiCondition>(condition)?, &cfg.sim, &mut schedule_rng(seed));
    to_py(py, &sched.segments())
}

/// A GVF agent driven directly by hazard bits.
#[pyclass(module = "frost_hollow")]
struct Agent {
    state: AgentState,
    gvf: GvfParams,
}

#[pymethods]
impl Agent {
    /// `kind` is "bc" or "tct".
    #[new]
    #[pyo3(signature = (kind, config = None))]
    fn new(kind: &str, config: Option<&ExperimentConfig>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        let repr = parse::<AgentKind>(kind)?.repr().ok_or_else(|| value_err("agent kind 'none' has no learner"))?;
        Ok(Self { state: AgentState::new(repr, cfg.repr, cfg.sim.dt), gvf: cfg.gvf })
    }

    /// One step. Returns `(prediction, signal)` using pre-update weights.
    fn tick(&mut self, hazard_now: bool, hazard_next: bool) -> PyResult<(f64, bool)> {
        let out = self.state.tick(hazard_now, hazard_next, &self.gvf).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok((out.prediction, out.signal))
    }

    #[getter]
    fn feature_index(&self) -> usize {
        self.state.feature_index()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.state.gvf.w.clone()
    }

    #[getter]
    fn traces(&self) -> Vec<f64> {
        self.state.gvf.e.clone()
    }
}

#[pyclass(module = "frost_hollow", from_py_object)]
#[derive(Clone)]
struct TrialLog {
    inner: core_harness::TrialLog,
}

impl TrialLog {
    fn column<T>(&self, f: impl Fn(&core_harness::StepRecord) -> T) -> Vec<T> {
        self.inner.steps.iter().map(f).collect()
    }
}

#[pymethods]
impl TrialLog {
    #[getter]
    fn header<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.header)
    }

    #[getter]
    fn pulses<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.pulses)
    }

    fn __len__(&self) -> usize {
        self.inner.steps.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn step<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyAny>> {
        let rec = self.inner.steps.get(index).ok_or_else(|| value_err("step index out of range"))?;
        to_py(py, rec)
    }

    fn t(&self) -> Vec<f64> {
        self.column(|r| r.t)
    }

    fn hazard(&self) -> Vec<bool> {
        self.column(|r| r.hazard_active)
    }

    fn signals(&self) -> Vec<bool> {
        self.column(|r| r.signal)
    }

    fn predictions(&self) -> Vec<Option<f64>> {
        self.column(|r| r.prediction)
    }

    fn positions(&self) -> Vec<(f64, f64)> {
        self.column(|r| (r.pos.x, r.pos.y))
    }

    #[pyo3(signature = (config = None))]
    fn pulse_metrics<'py>(&self, py: Python<'py>, config: Option<&ExperimentConfig>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &core_harness::pulse_metrics(&self.inner, &config_or_default(config).sim))
    }

    #[pyo3(signature = (config = None))]
    fn performance<'py>(&self, py: Python<'py>, config: Option<&ExperimentConfig>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &core_harness::trial_performance(&self.inner, &config_or_default(config).sim))
    }

    #[pyo3(signature = (config = None))]
    fn reliable_pulse_index(&self, config: Option<&ExperimentConfig>) -> Option<usize> {
        core_harness::reliable_pulse_index(&core_harness::pulse_metrics(&self.inner, &config_or_default(config).sim))
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(value_err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        export::write_trial_log(&path, &self.inner).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        let h = &self.inner.header;
        format!("TrialLog({}:{}, seed={}, steps={})", h.condition, h.agent, h.seed, self.inner.steps.len())
    }
}

#[pyfunction]
fn read_trial_log(path: PathBuf) -> PyResult<TrialLog> {
    export::read_trial_log(&path).map(|inner| TrialLog { inner }).map_err(core_err)
}

/// One closed-loop trial with the configured scripted human.
#[pyfunction]
#[pyo3(signature = (condition, agent, seed, config = None))]
fn run_trial(
    py: Python<'_>,
    condition: &str,
    agent: &str,
    seed: u64,
    config: Option<&ExperimentConfig>,
) -> PyResult<TrialLog> {
    let cfg = config_or_default(config);
    let (cond, agent) = (parse::<IsiCondition>(condition)?, parse::<AgentKind>(agent)?);
    py.detach(|| core_harness::run_trial(&cfg, cond, agent, seed))
        .map(|inner| TrialLog { inner })
        .map_err(core_err)
}

/// Re-runs a log's recorded inputs against a fresh environment and agent.
#[pyfunction]
#[pyo3(signature = (log, config = None))]
fn replay(py: Python<'_>, log: &TrialLog, config: Option<&ExperimentConfig>) -> PyResult<TrialLog> {
    let mut cfg = config_or_default(config);
    let h = &log.inner.header;
    cfg.sim.trial_len = h.n_steps as f64 * h.dt;
    let mut inputs = Replay::new(log.inner.input_trace());
    py.detach(|| core_harness::run_trial_with(&cfg, h.condition, h.agent, h.seed, &mut inputs))
        .map(|inner| TrialLog { inner })
        .map_err(core_err)
}

/// Runs the grid in parallel. `cells` is e.g. "fixed:tct,random:none".
#[pyfunction]
#[pyo3(signature = (config = None, cells = None))]
fn run_experiment(py: Python<'_>, config: Option<&ExperimentConfig>, cells: Option<&str>) -> PyResult<Vec<TrialLog>> {
    let cfg = config_or_default(config);
    let cells: Vec<Cell> = match cells {
        Some(s) => core_harness::parse_cells(s).map_err(value_err)?,
        None => cfg.cells(),
    };
    py.detach(|| core_harness::run_experiment(&cfg, &cells))
        .into_iter()
        .map(|(_, r)| r.map(|inner| TrialLog { inner }).map_err(core_err))
        .collect()
}

/// Writes logs, metric tables and the summary under `out_dir`.
#[pyfunction]
#[pyo3(signature = (logs, out_dir, config = None))]
fn export_run(logs: Vec<TrialLog>, out_dir: PathBuf, config: Option<&ExperimentConfig>) -> PyResult<Vec<PathBuf>> {
    let logs: Vec<_> = logs.into_iter().map(|l| l.inner).collect();
    export::export(&logs, &config_or_default(config).sim, &out_dir).map_err(core_err)
}

/// Live session driven by explicit ticks.
#[pyclass(module = "frost_hollow")]
struct Session {
    inner: Option<core_session::Session>,
    initial: core_session::StateFrame,
}

impl Session {
    fn live(&mut self) -> PyResult<&mut core_session::Session> {
        self.inner.as_mut().ok_or_else(|| PyRuntimeError::new_err("session already ended"))
    }
}

#[pymethods]
impl Session {
    /// Keyword arguments are session settings: condition, agent_kind,
    /// tick_hz, seed, trial_len, debug.
    #[new]
    #[pyo3(signature = (config = None, **settings))]
    fn new(config: Option<&ExperimentConfig>, settings: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let session_cfg: SessionConfig = match settings {
            Some(d) => from_py(d.as_any())?,
            None => SessionConfig::default(),
        };
        let (inner, initial) =
            core_session::Session::start(&config_or_default(config), session_cfg).map_err(value_err)?;
        Ok(Self { inner: Some(inner), initial })
    }

    /// Frame sent before the first tick.
    #[getter]
    fn initial_frame<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.initial)
    }

    #[getter]
    fn frame<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let frame = self.live()?.frame();
        to_py(py, &frame)
    }

    #[getter]
    fn is_over(&mut self) -> PyResult<bool> {
        Ok(self.live()?.is_over())
    }

    #[pyo3(signature = (seq, move_to = None, cache = false))]
    fn submit_input(&mut self, seq: u64, move_to: Option<(f64, f64)>, cache: bool) -> PyResult<()> {
        let input = ClientInput { seq, move_to: move_to.map(|(x, y)| [x, y].into()), cache };
        self.live()?.submit_input(input).map_err(value_err)
    }

    /// Advances one step. Returns `(frame, summary)`; summary is a dict on
    /// the tick that ends the trial and None otherwise.
    fn tick<'py>(&mut self, py: Python<'py>) -> PyResult<(Bound<'py, PyAny>, Option<Bound<'py, PyAny>>)> {
        let out = self.live()?.tick().map_err(core_err)?;
        let summary = out.summary.map(|s| to_py(py, &s)).transpose()?;
        Ok((to_py(py, &out.frame)?, summary))
    }

    /// Closes the session and returns its log.
    fn end(&mut self) -> PyResult<TrialLog> {
        let s = self.inner.take().ok_or_else(|| PyRuntimeError::new_err("session already ended"))?;
        Ok(TrialLog { inner: s.end() })
    }
}

#[pymodule]
#[pyo3(name = "frost_hollow")]
fn frost_hollow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("USEFUL_LEAD", core_harness::USEFUL_LEAD)?;
    m.add_class::<ExperimentConfig>()?;
    m.add_class::<Agent>()?;
    m.add_class::<TrialLog>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(export_run, m)?)?;
    m.add_function(wrap_pyfunction!(read_trial_log, m)?)?;
    Ok(())
}
