//! Closed-loop trial execution and the per-trial log.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentOutput, AgentState};
use crate::env::{EnvEvent, HumanAction, IsiCondition, Point, PulseSchedule, WorldState};
use crate::error::Error;
use crate::harness::config::{AgentKind, ExperimentConfig};
use crate::human::{HumanModelState, Observation};

pub const LOG_SCHEMA: &str = "frost-hollow/trial-log/v1";

/// RNG stream for the hazard schedule.
pub fn schedule_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG stream for a scripted participant, disjoint from the schedule stream.
pub fn human_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub schema: String,
    pub config_hash: String,
    pub condition: IsiCondition,
    pub agent: AgentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    pub dt: f64,
    pub n_steps: u64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

/// State of the world during step `step`, which starts at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub pos: Point,
    pub gauge: f64,
    pub points: u32,
    pub hazard_active: bool,
    pub being_hit: bool,
    /// Absent when no agent is present.
    pub prediction: Option<f64>,
    pub signal: bool,
    pub cache_event: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub index: usize,
    pub onset_t: f64,
    pub falling_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub header: TrialHeader,
    pub steps: Vec<StepRecord>,
    pub pulses: Vec<PulseRecord>,
}

impl TrialLog {
    /// Checks the structural invariants of a log.
    pub fn validate(&self) -> Result<(), String> {
        if self.header.complete && self.steps.len() as u64 != self.header.n_steps {
            return Err(format!(
                "complete log has {} records, expected {}",
                self.steps.len(),
                self.header.n_steps
            ));
        }
        for (i, rec) in self.steps.iter().enumerate() {
            if rec.step != i as u64 {
                return Err(format!("record {i} carries step {}", rec.step));
            }
            if rec.being_hit && !rec.hazard_active {
                return Err(format!("step {i}: hit while hazard inactive"));
            }
            if i > 0 && rec.points < self.steps[i - 1].points {
                return Err(format!("step {i}: points decreased"));
            }
        }
        // Every inactive->active transition must be a listed onset.
        let mut listed = self.pulses.iter().peekable();
        let mut prev = false;
        for rec in &self.steps {
            if rec.hazard_active && !prev {
                let pulse = listed
                    .next()
                    .ok_or_else(|| format!("unlisted pulse onset at t={}", rec.t))?;
                if !(rec.t >= pulse.onset_t && rec.t - pulse.onset_t < self.header.dt) {
                    return Err(format!(
                        "pulse {} onset {} does not match first active step at {}",
                        pulse.index, pulse.onset_t, rec.t
                    ));
                }
            }
            prev = rec.hazard_active;
        }
        if let Some(extra) = listed.next() {
            return Err(format!("pulse {} never became active in the log", extra.index));
        }
        Ok(())
    }

    /// Action applied at every step, recovered from the log.
    pub fn input_trace(&self) -> Vec<HumanAction> {
        self.steps
            .iter()
            .map(|r| HumanAction { move_to: Some(r.pos), cache: r.cache_event })
            .collect()
    }
}

/// Produces the action for each step.
pub trait Participant {
    /// `last` is what the participant observed after the previous step,
    /// `None` before the first step.
    fn act(&mut self, step: u64, last: Option<&Observation>) -> HumanAction;
}

/// A scripted human model with its own RNG stream.
pub struct ScriptedHuman<'a> {
    cfg: &'a ExperimentConfig,
    state: HumanModelState,
    rng: ChaCha8Rng,
}

impl<'a> ScriptedHuman<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64) -> Self {
        Self { cfg, state: HumanModelState::new(&cfg.human), rng: human_rng(seed) }
    }
}

impl Participant for ScriptedHuman<'_> {
    fn act(&mut self, _step: u64, last: Option<&Observation>) -> HumanAction {
        match last {
            None => HumanAction::hold(),
            Some(obs) => self.state.step(&self.cfg.human, &self.cfg.sim, obs, &mut self.rng),
        }
    }
}

/// Replays a recorded action trace; holds once the trace runs out.
pub struct Replay {
    actions: Vec<HumanAction>,
}

impl Replay {
    pub fn new(actions: Vec<HumanAction>) -> Self {
        Self { actions }
    }
}

impl Participant for Replay {
    fn act(&mut self, step: u64, _last: Option<&Observation>) -> HumanAction {
        self.actions.get(step as usize).copied().unwrap_or_default()
    }
}

/// Outcome of a single [`TrialRunner::step`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub record: StepRecord,
    pub events: Vec<EnvEvent>,
    pub observation: Observation,
}

/// Environment, schedule and agent for one trial, advanced one step at a
/// time. Shared by batch runs and live sessions.
pub struct TrialRunner {
    cfg: ExperimentConfig,
    sched: PulseSchedule,
    world: WorldState,
    agent: Option<AgentState>,
    log: TrialLog,
}

impl TrialRunner {
    pub fn new(cfg: &ExperimentConfig, condition: IsiCondition, agent: AgentKind, seed: u64) -> Self {
        let sched = PulseSchedule::generate(condition, &cfg.sim, &mut schedule_rng(seed));
        Self::with_schedule(cfg, condition, agent, seed, sched)
    }

    pub fn with_schedule(
        cfg: &ExperimentConfig,
        condition: IsiCondition,
        agent: AgentKind,
        seed: u64,
        sched: PulseSchedule,
    ) -> Self {
        let n_steps = cfg.sim.n_steps();
        let pulses = sched
            .onsets()
            .iter()
            .enumerate()
            .filter(|(_, &onset)| n_steps > 0 && onset <= cfg.sim.time_at(n_steps - 1))
            .map(|(index, &onset_t)| PulseRecord {
                index,
                onset_t,
                falling_t: sched.falling_edges()[index + 1],
            })
            .collect();
        let header = TrialHeader {
            schema: LOG_SCHEMA.to_string(),
            config_hash: cfg.hash(),
            condition,
            agent,
            seed,
            session: None,
            trial: None,
            dt: cfg.sim.dt,
            n_steps,
            complete: false,
            fault: None,
        };
        Self {
            agent: agent.repr().map(|kind| AgentState::new(kind, cfg.repr, cfg.sim.dt)),
            cfg: cfg.clone(),
            sched,
            world: WorldState::default(),
            log: TrialLog { header, steps: Vec::with_capacity(n_steps as usize), pulses },
        }
    }

    pub fn schedule(&self) -> &PulseSchedule {
        &self.sched
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn agent(&self) -> Option<&AgentState> {
        self.agent.as_ref()
    }

    pub fn is_over(&self) -> bool {
        self.world.step_index >= self.cfg.sim.n_steps()
    }

    /// The log so far, before [`TrialRunner::finish`] settles the header.
    pub fn log(&self) -> &TrialLog {
        &self.log
    }

    pub fn last_record(&self) -> Option<&StepRecord> {
        self.log.steps.last()
    }

    /// Runs env step then agent tick, and appends the record.
    pub fn step(&mut self, action: &HumanAction) -> Result<StepOutcome, Error> {
        let sim = &self.cfg.sim;
        let k = self.world.step_index;
        let (next, events) = self.world.step(action, &self.sched, sim)?;
        let hazard_next = self.sched.is_active(sim.time_at(k + 1));
        let output = match self.agent.as_mut() {
            Some(agent) => match agent.tick(next.hazard_active, hazard_next, &self.cfg.gvf) {
                Ok(out) => Some(out),
                Err(source) => {
                    self.log.header.fault = Some(format!("step {k}: {source}"));
                    return Err(Error::Diverged { step: k, source, partial: None });
                }
            },
            None => None,
        };
        let (prediction, signal) = match output {
            Some(AgentOutput { prediction, signal }) => (Some(prediction), signal),
            None => (None, false),
        };
        let record = StepRecord {
            step: k,
            t: sim.time_at(k),
            pos: next.pos,
            gauge: next.gauge,
            points: next.points,
            hazard_active: next.hazard_active,
            being_hit: next.being_hit,
            prediction,
            signal,
            cache_event: events.iter().any(|e| matches!(e, EnvEvent::Cache { .. })),
        };
        let observation = Observation {
            t: record.t,
            gauge: next.gauge,
            gauge_full: next.gauge_full(sim),
            hazard_active: next.hazard_active,
            agent_signal: signal,
        };
        self.world = next;
        self.log.steps.push(record);
        Ok(StepOutcome { record, events, observation })
    }

    /// Closes the trial; the log is flagged complete only if every step ran.
    pub fn finish(mut self) -> TrialLog {
        self.log.header.complete = self.is_over() && self.log.header.fault.is_none();
        let done = self.world.step_index;
        let last_t = self.cfg.sim.time_at(done.saturating_sub(1));
        self.log.pulses.retain(|p| done > 0 && p.onset_t <= last_t);
        self.log
    }
}

/// Runs one closed-loop trial: env step, agent tick, then the participant
/// chooses the next action.
pub fn run_trial_with(
    cfg: &ExperimentConfig,
    condition: IsiCondition,
    agent: AgentKind,
    seed: u64,
    participant: &mut dyn Participant,
) -> Result<TrialLog, Error> {
    let mut runner = TrialRunner::new(cfg, condition, agent, seed);
    let mut last: Option<Observation> = None;
    while !runner.is_over() {
        let k = runner.world().step_index;
        let action = participant.act(k, last.as_ref());
        match runner.step(&action) {
            Ok(outcome) => last = Some(outcome.observation),
            Err(Error::Diverged { step, source, .. }) => {
                return Err(Error::Diverged { step, source, partial: Some(Box::new(runner.finish())) })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(runner.finish())
}

/// Runs one trial with the configured scripted human.
pub fn run_trial(
    cfg: &ExperimentConfig,
    condition: IsiCondition,
    agent: AgentKind,
    seed: u64,
) -> Result<TrialLog, Error> {
    let mut human = ScriptedHuman::new(cfg, seed);
    run_trial_with(cfg, condition, agent, seed, &mut human)
}
