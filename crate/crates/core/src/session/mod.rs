//! Live session state machine. No clock and no sockets: the host calls
//! [`Session::tick`] at the configured rate and forwards frames.

pub mod protocol;

use serde::{Deserialize, Serialize};

use crate::agent::AgentState;
use crate::env::{HumanAction, IsiCondition, Point};
use crate::error::{ConfigError, Error};
use crate::harness::config::{AgentKind, ExperimentConfig};
use crate::harness::metrics::{trial_performance, TrialPerformance};
use crate::harness::trial::{TrialLog, TrialRunner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub condition: IsiCondition,
    pub agent_kind: AgentKind,
    pub tick_hz: u32,
    pub seed: u64,
    pub trial_len: f64,
    /// Streams the raw prediction in frames. Development only.
    pub debug: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            condition: IsiCondition::Fixed,
            agent_kind: AgentKind::Tct,
            tick_hz: 125,
            seed: 0,
            trial_len: 300.0,
            debug: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self, dt: f64) -> Result<(), ConfigError> {
        if self.tick_hz == 0 || f64::from(self.tick_hz) != (1.0 / dt).round() {
            return Err(ConfigError::invalid(format!(
                "tick_hz {} does not match dt {dt} (expected {})",
                self.tick_hz,
                (1.0 / dt).round()
            )));
        }
        if !(self.trial_len.is_finite() && self.trial_len >= dt) {
            return Err(ConfigError::invalid(format!("trial_len must be at least one step, got {}", self.trial_len)));
        }
        Ok(())
    }

    /// The experiment config a session with these settings runs under.
    pub fn experiment(&self, base: &ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
        self.validate(base.sim.dt)?;
        let mut cfg = base.clone();
        cfg.sim.trial_len = self.trial_len;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientInput {
    pub seq: u64,
    /// Target position in meters; `None` holds.
    #[serde(default)]
    pub move_to: Option<Point>,
    #[serde(default)]
    pub cache: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum InputRejected {
    #[error("seq {got} is not greater than {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("move_to is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub step: u64,
    pub t: f64,
    pub pos: Point,
    pub gauge: f64,
    pub points: u32,
    pub hazard_active: bool,
    pub being_hit: bool,
    pub agent_signal: bool,
    pub trial_over: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<f64>,
}

/// Result of one tick. `summary` is set exactly once, on the tick that
/// ends the trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub frame: StateFrame,
    pub summary: Option<TrialPerformance>,
}

pub struct Session {
    cfg: SessionConfig,
    exp: ExperimentConfig,
    runner: TrialRunner,
    pending: Option<HumanAction>,
    last_seq: Option<u64>,
    frame: StateFrame,
}

impl Session {
    /// Generates the schedule and zeroes the agent. Returns the initial frame.
    pub fn start(base: &ExperimentConfig, cfg: SessionConfig) -> Result<(Self, StateFrame), ConfigError> {
        let exp = cfg.experiment(base)?;
        let runner = TrialRunner::new(&exp, cfg.condition, cfg.agent_kind, cfg.seed);
        let frame = frame_of(&runner, false, cfg.debug.then_some(0.0), cfg.debug);
        Ok((Self { cfg, exp, runner, pending: None, last_seq: None, frame }, frame))
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn experiment(&self) -> &ExperimentConfig {
        &self.exp
    }

    pub fn agent(&self) -> Option<&AgentState> {
        self.runner.agent()
    }

    pub fn is_over(&self) -> bool {
        self.runner.is_over()
    }

    pub fn frame(&self) -> StateFrame {
        self.frame
    }

    /// Buffers an input for the next tick. The latest position wins; a
    /// cache press within the tick is kept even if a later input omits it.
    pub fn submit_input(&mut self, input: ClientInput) -> Result<(), InputRejected> {
        if let Some(last) = self.last_seq {
            if input.seq <= last {
                return Err(InputRejected::OutOfOrder { last, got: input.seq });
            }
        }
        if input.move_to.is_some_and(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(InputRejected::NonFinite);
        }
        self.last_seq = Some(input.seq);
        let prev = self.pending.unwrap_or_default();
        self.pending = Some(HumanAction {
            move_to: input.move_to.or(prev.move_to),
            cache: input.cache || prev.cache,
        });
        Ok(())
    }

    /// Advances one step with the buffered input. After the trial is over
    /// it repeats the terminal frame.
    pub fn tick(&mut self) -> Result<TickOutput, Error> {
        if self.runner.is_over() {
            return Ok(TickOutput { frame: self.frame, summary: None });
        }
        let action = self.pending.take().unwrap_or_default();
        let outcome = self.runner.step(&action)?;
        self.frame = frame_of(&self.runner, outcome.record.signal, outcome.record.prediction, self.cfg.debug);
        let summary = self.runner.is_over().then(|| trial_performance(self.runner.log(), &self.exp.sim));
        Ok(TickOutput { frame: self.frame, summary })
    }

    /// Closes the session. A session ended early yields a log flagged
    /// incomplete.
    pub fn end(self) -> TrialLog {
        self.runner.finish()
    }
}

fn frame_of(runner: &TrialRunner, signal: bool, prediction: Option<f64>, debug: bool) -> StateFrame {
    let w = runner.world();
    StateFrame {
        step: w.step_index,
        t: w.t,
        pos: w.pos,
        gauge: w.gauge,
        points: w.points,
        hazard_active: w.hazard_active,
        being_hit: w.being_hit,
        agent_signal: signal,
        trial_over: runner.is_over(),
        prediction: if debug { prediction } else { None },
    }
}
