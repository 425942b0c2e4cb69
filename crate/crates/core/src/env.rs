//! Fixed-timestep Frost Hollow environment.
//!
//! The participant stands in a small warm disc at the arena center to build
//! heat, and must leave the larger hazard disc while a hazard pulse is
//! active. A full gauge can be cached as a point. Everything here is a pure
//! rule engine: positions are set directly by [`HumanAction`], kinematics
//! belong to whoever produces the actions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Slack used when deciding the gauge is full or empty.
pub const GAUGE_EPS: f64 = 1e-9;

/// Static environment parameters. Durations in seconds, distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub trial_len: f64,
    pub center_radius: f64,
    pub hazard_radius: f64,
    /// Heat per second gained while inside the center disc.
    pub fill_rate: f64,
    /// Heat per second lost while hit by an active pulse.
    pub drain_rate: f64,
    pub gauge_cap: f64,
    pub pulse_len: f64,
    pub inactive_min: f64,
    pub inactive_max: f64,
    /// Maximum per-pulse shift of the inactive duration in the drifting condition.
    pub drift_step: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.008,
            trial_len: 300.0,
            center_radius: 0.165,
            hazard_radius: 1.0,
            fill_rate: 0.1875,
            drain_rate: 25.0,
            gauge_cap: 5.0,
            pulse_len: 4.0,
            inactive_min: 12.0,
            inactive_max: 22.0,
            drift_step: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("dt", self.dt),
            ("trial_len", self.trial_len),
            ("center_radius", self.center_radius),
            ("hazard_radius", self.hazard_radius),
            ("fill_rate", self.fill_rate),
            ("drain_rate", self.drain_rate),
            ("gauge_cap", self.gauge_cap),
            ("pulse_len", self.pulse_len),
            ("inactive_min", self.inactive_min),
            ("inactive_max", self.inactive_max),
            ("drift_step", self.drift_step),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::invalid(format!(
                    "sim.{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.inactive_min > self.inactive_max {
            return Err(ConfigError::invalid(format!(
                "sim.inactive_min ({}) exceeds sim.inactive_max ({})",
                self.inactive_min, self.inactive_max
            )));
        }
        Ok(())
    }

    /// Number of steps in a trial; `trial_len` is rounded to a whole number of steps.
    pub fn n_steps(&self) -> u64 {
        (self.trial_len / self.dt).round() as u64
    }

    /// Start time of step `step`.
    pub fn time_at(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    /// Most points a participant can cache in one trial.
    pub fn max_points(&self) -> u32 {
        (self.trial_len * self.fill_rate / self.gauge_cap + GAUGE_EPS).floor() as u32
    }

    /// Heat gained by standing in the center for the whole trial.
    pub fn max_heat_gain(&self) -> f64 {
        self.trial_len * self.fill_rate
    }
}

/// Inter-stimulus interval regime for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsiCondition {
    Fixed,
    Drifting,
    Random,
}

impl IsiCondition {
    pub const ALL: [IsiCondition; 3] = [Self::Fixed, Self::Drifting, Self::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::Drifting => "drifting",
            Self::Random => "random",
        }
    }
}

impl fmt::Display for IsiCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IsiCondition {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(Self::Fixed),
            "drifting" | "drift" => Ok(Self::Drifting),
            "random" => Ok(Self::Random),
            other => Err(ConfigError::invalid(format!("unknown ISI condition `{other}`"))),
        }
    }
}

/// One inactive stretch followed by one hazard pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub inactive: f64,
    pub active: f64,
}

/// Hazard timeline for one trial.
///
/// The trial opens on a virtual falling edge at `t = 0`, so segment `i`
/// spans `[falling_edges[i], falling_edges[i + 1])` and its pulse is active
/// on `[onsets[i], falling_edges[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    segments: Vec<Segment>,
    falling_edges: Vec<f64>,
    onsets: Vec<f64>,
}

/// Result of looking up a time in a [`PulseSchedule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardPhase {
    pub active: bool,
    pub pulse_index: usize,
    pub since_falling_edge: f64,
}

impl PulseSchedule {
    pub fn from_segments(segments: Vec<Segment>) -> Self {
        let mut falling_edges = Vec::with_capacity(segments.len() + 1);
        let mut onsets = Vec::with_capacity(segments.len());
        let mut edge = 0.0;
        falling_edges.push(edge);
        for seg in &segments {
            let onset = edge + seg.inactive;
            onsets.push(onset);
            edge = onset + seg.active;
            falling_edges.push(edge);
        }
        Self { segments, falling_edges, onsets }
    }

    /// Builds a schedule from inactive durations with a common pulse length.
    pub fn from_inactive(inactive: &[f64], pulse_len: f64) -> Self {
        Self::from_segments(
            inactive
                .iter()
                .map(|&inactive| Segment { inactive, active: pulse_len })
                .collect(),
        )
    }

    /// Draws the hazard timeline for one trial.
    ///
    /// Fixed draws one inactive duration and repeats it, drifting performs a
    /// clamped random walk, random draws every duration independently.
    /// Segments are appended until they cover `trial_len`.
    pub fn generate<R: Rng + ?Sized>(cond: IsiCondition, cfg: &SimConfig, rng: &mut R) -> Self {
        let (lo, hi) = (cfg.inactive_min, cfg.inactive_max);
        let draw = |rng: &mut R| if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let mut segments = Vec::new();
        let mut covered = 0.0;
        let mut prev: Option<f64> = None;
        while covered < cfg.trial_len {
            let inactive = match (cond, prev) {
                (_, None) => draw(rng),
                (IsiCondition::Fixed, Some(p)) => p,
                (IsiCondition::Drifting, Some(p)) => {
                    let shift = rng.random_range(-cfg.drift_step..=cfg.drift_step);
                    drift(p, shift, lo, hi)
                }
                (IsiCondition::Random, Some(_)) => draw(rng),
            };
            prev = Some(inactive);
            covered += inactive + cfg.pulse_len;
            segments.push(Segment { inactive, active: cfg.pulse_len });
        }
        Self::from_segments(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Falling edges including the virtual one at `t = 0`.
    pub fn falling_edges(&self) -> &[f64] {
        &self.falling_edges
    }

    pub fn onsets(&self) -> &[f64] {
        &self.onsets
    }

    /// Total time covered by the segments.
    pub fn span(&self) -> f64 {
        *self.falling_edges.last().unwrap_or(&0.0)
    }

    pub fn phase(&self, t: f64) -> HazardPhase {
        // falling_edges[0] == 0, so for t >= 0 the partition point is >= 1.
        let idx = self.falling_edges.partition_point(|&edge| edge <= t).max(1) - 1;
        let since_falling_edge = t - self.falling_edges[idx];
        let active = self.onsets.get(idx).is_some_and(|&onset| t >= onset);
        HazardPhase { active, pulse_index: idx, since_falling_edge }
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.phase(t).active
    }
}

/// Next inactive duration of the drifting condition.
pub fn drift(prev: f64, shift: f64, lo: f64, hi: f64) -> f64 {
    (prev + shift).clamp(lo, hi)
}

/// Arena position in meters, origin at the center.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// What the participant does for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HumanAction {
    /// `None` holds the current position.
    pub move_to: Option<Point>,
    pub cache: bool,
}

impl HumanAction {
    pub fn hold() -> Self {
        Self::default()
    }

    pub fn move_to(p: Point) -> Self {
        Self { move_to: Some(p), cache: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EnvEvent {
    PulseStart { t: f64 },
    PulseEnd { t: f64 },
    HitStart { t: f64 },
    HitStop { t: f64 },
    GaugeFull { t: f64 },
    Cache { t: f64, points: u32 },
}

/// Returned when stepping past the end of the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("trial is over after {steps} steps")]
pub struct TrialOver {
    pub steps: u64,
}

/// World state after `step_index` completed steps.
///
/// `hazard_active` and `being_hit` describe the most recently executed
/// step; `t` is elapsed simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub t: f64,
    pub step_index: u64,
    pub pos: Point,
    pub gauge: f64,
    pub points: u32,
    pub hazard_active: bool,
    pub being_hit: bool,
}

impl Default for WorldState {
    fn default() -> Self {
        Self {
            t: 0.0,
            step_index: 0,
            pos: Point::ORIGIN,
            gauge: 0.0,
            points: 0,
            hazard_active: false,
            being_hit: false,
        }
    }
}

impl WorldState {
    pub fn gauge_full(&self, cfg: &SimConfig) -> bool {
        self.gauge >= cfg.gauge_cap - GAUGE_EPS
    }

    /// Advances one step. Within a step: move, drain if hit, fill if in
    /// the center, then cache.
    pub fn step(
        &self,
        action: &HumanAction,
        sched: &PulseSchedule,
        cfg: &SimConfig,
    ) -> Result<(WorldState, Vec<EnvEvent>), TrialOver> {
        let n_steps = cfg.n_steps();
        if self.step_index >= n_steps {
            return Err(TrialOver { steps: n_steps });
        }
        let t = cfg.time_at(self.step_index);
        let active = sched.is_active(t);
        let pos = action.move_to.unwrap_or(self.pos);
        let r = pos.norm();
        let hit = active && r <= cfg.hazard_radius;

        let mut events = Vec::new();
        let was_full = self.gauge_full(cfg);
        let mut gauge = self.gauge;
        if hit {
            gauge -= cfg.drain_rate * cfg.dt;
            if gauge <= GAUGE_EPS {
                gauge = 0.0;
            }
        }
        if r <= cfg.center_radius {
            gauge = (gauge + cfg.fill_rate * cfg.dt).min(cfg.gauge_cap);
        }
        let mut points = self.points;
        let full = gauge >= cfg.gauge_cap - GAUGE_EPS;
        if full && !was_full {
            events.push(EnvEvent::GaugeFull { t });
        }
        if action.cache && full {
            points += 1;
            gauge = 0.0;
            events.push(EnvEvent::Cache { t, points });
        }

        match (self.hazard_active, active) {
            (false, true) => events.push(EnvEvent::PulseStart { t }),
            (true, false) => events.push(EnvEvent::PulseEnd { t }),
            _ => {}
        }
        match (self.being_hit, hit) {
            (false, true) => events.push(EnvEvent::HitStart { t }),
            (true, false) => events.push(EnvEvent::HitStop { t }),
            _ => {}
        }

        let next = WorldState {
            t: cfg.time_at(self.step_index + 1),
            step_index: self.step_index + 1,
            pos,
            gauge,
            points,
            hazard_active: active,
            being_hit: hit,
        };
        Ok((next, events))
    }
}
