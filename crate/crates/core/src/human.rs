//! Scripted participants.
//!
//! A model stands at the arena center, leaves along the +x axis when its
//! exit trigger fires, waits outside the hazard disc until the pulse has
//! passed, then walks back. Triggers:
//!
//! * `CueFollower`: `reaction_delay` after the agent's signal rises.
//! * `InternalTimer`: `isi_estimate - safety_margin` after the last falling
//!   edge, where the estimate is a running mean of noisy observed gaps.
//! * `Hybrid`: whichever of the two fires first.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{HumanAction, Point, SimConfig};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanKind {
    CueFollower,
    InternalTimer,
    Hybrid,
}

impl fmt::Display for HumanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CueFollower => "cue_follower",
            Self::InternalTimer => "internal_timer",
            Self::Hybrid => "hybrid",
        })
    }
}

impl FromStr for HumanKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cue_follower" | "cuefollower" => Ok(Self::CueFollower),
            "internal_timer" | "internaltimer" => Ok(Self::InternalTimer),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(ConfigError::invalid(format!("unknown human model `{other}`"))),
        }
    }
}

/// Scripted participant parameters, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanModelConfig {
    pub kind: HumanKind,
    pub reaction_delay: f64,
    /// Time to walk from the center to the hazard boundary.
    pub exit_duration: f64,
    pub return_delay: f64,
    pub timer_noise_sigma: f64,
    pub safety_margin: f64,
    /// Inactive-duration guess used before any pulse has been observed.
    pub initial_isi_estimate: f64,
}

impl Default for HumanModelConfig {
    fn default() -> Self {
        Self {
            kind: HumanKind::Hybrid,
            reaction_delay: 0.25,
            exit_duration: 0.89,
            return_delay: 0.5,
            timer_noise_sigma: 0.5,
            safety_margin: 1.5,
            initial_isi_estimate: 16.0,
        }
    }
}

impl HumanModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("reaction_delay", self.reaction_delay),
            ("exit_duration", self.exit_duration),
            ("return_delay", self.return_delay),
            ("timer_noise_sigma", self.timer_noise_sigma),
            ("safety_margin", self.safety_margin),
            ("initial_isi_estimate", self.initial_isi_estimate),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::invalid(format!("human.{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanPhase {
    InCenter,
    Exiting,
    Outside,
    Returning,
}

/// What a scripted participant perceives after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub gauge: f64,
    pub gauge_full: bool,
    pub hazard_active: bool,
    pub agent_signal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanModelState {
    pub phase: HumanPhase,
    pub phase_elapsed: f64,
    pub isi_estimate: f64,
    pub last_falling_edge: f64,
    pub radius: f64,
    pub observed_count: u32,
    observed_sum: f64,
    cue_trigger: Option<f64>,
    pulse_cleared_at: Option<f64>,
    prev_signal: bool,
    prev_hazard: bool,
}

impl HumanModelState {
    pub fn new(cfg: &HumanModelConfig) -> Self {
        Self {
            phase: HumanPhase::InCenter,
            phase_elapsed: 0.0,
            isi_estimate: cfg.initial_isi_estimate,
            last_falling_edge: 0.0,
            radius: 0.0,
            observed_count: 0,
            observed_sum: 0.0,
            cue_trigger: None,
            pulse_cleared_at: None,
            prev_signal: false,
            prev_hazard: false,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.radius, 0.0)
    }

    /// Folds one observed inactive duration into the running mean.
    pub fn update_isi_estimate(&mut self, observed_inactive: f64) {
        self.observed_count += 1;
        self.observed_sum += observed_inactive;
        self.isi_estimate = self.observed_sum / f64::from(self.observed_count);
    }

    /// Time at which the internal timer says to leave.
    pub fn timer_trigger(&self, cfg: &HumanModelConfig) -> f64 {
        self.last_falling_edge + self.isi_estimate - cfg.safety_margin
    }

    fn exit_trigger(&self, cfg: &HumanModelConfig) -> Option<f64> {
        match cfg.kind {
            HumanKind::CueFollower => self.cue_trigger,
            HumanKind::InternalTimer => Some(self.timer_trigger(cfg)),
            HumanKind::Hybrid => Some(match self.cue_trigger {
                Some(cue) => cue.min(self.timer_trigger(cfg)),
                None => self.timer_trigger(cfg),
            }),
        }
    }

    fn enter(&mut self, phase: HumanPhase) {
        self.phase = phase;
        self.phase_elapsed = 0.0;
    }

    /// Consumes one observation and returns the action for the next step.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        cfg: &HumanModelConfig,
        sim: &SimConfig,
        obs: &Observation,
        rng: &mut R,
    ) -> HumanAction {
        let t = obs.t;
        if obs.hazard_active && !self.prev_hazard {
            let observed = t - self.last_falling_edge;
            let noise = Normal::new(0.0, cfg.timer_noise_sigma)
                .map(|n| n.sample(rng))
                .unwrap_or(0.0);
            self.update_isi_estimate((observed + noise).max(0.0));
        }
        if !obs.hazard_active && self.prev_hazard {
            self.last_falling_edge = t;
            self.cue_trigger = None;
            self.pulse_cleared_at = Some(t);
        }
        if obs.agent_signal && !self.prev_signal && cfg.kind != HumanKind::InternalTimer {
            self.cue_trigger = Some(t + cfg.reaction_delay);
        }
        self.prev_hazard = obs.hazard_active;
        self.prev_signal = obs.agent_signal;

        let speed = sim.hazard_radius / cfg.exit_duration.max(sim.dt);
        let stride = speed * sim.dt;
        self.phase_elapsed += sim.dt;

        if matches!(self.phase, HumanPhase::InCenter | HumanPhase::Returning)
            && self.exit_trigger(cfg).is_some_and(|at| t >= at)
        {
            self.cue_trigger = None;
            self.pulse_cleared_at = None;
            self.enter(HumanPhase::Exiting);
        }

        match self.phase {
            HumanPhase::InCenter => {}
            HumanPhase::Exiting => {
                self.radius += stride;
                if self.radius > sim.hazard_radius {
                    self.enter(HumanPhase::Outside);
                }
            }
            HumanPhase::Outside => {
                if self.pulse_cleared_at.is_some_and(|end| t >= end + cfg.return_delay) {
                    self.enter(HumanPhase::Returning);
                }
            }
            HumanPhase::Returning => {
                self.radius -= stride;
                if self.radius <= 0.0 {
                    self.radius = 0.0;
                    self.enter(HumanPhase::InCenter);
                }
            }
        }

        HumanAction {
            move_to: Some(self.position()),
            cache: obs.gauge_full && self.phase == HumanPhase::InCenter,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cue_follower() -> HumanModelConfig {
        HumanModelConfig { kind: HumanKind::CueFollower, ..HumanModelConfig::default() }
    }

    #[test]
    fn running_mean_estimates() {
        let cfg = HumanModelConfig::default();
        for (obs, expected) in [(&[16.0, 16.0][..], 16.0), (&[12.0, 22.0], 17.0), (&[14.0, 15.0, 19.0], 16.0)] {
            let mut m = HumanModelState::new(&cfg);
            for &o in obs {
                m.update_isi_estimate(o);
            }
            assert!((m.isi_estimate - expected).abs() < 1e-12);
        }
    }

    fn drive(
        cfg: &HumanModelConfig,
        signal: impl Fn(f64) -> bool,
        hazard: impl Fn(f64) -> bool,
        until: f64,
    ) -> Vec<(f64, HumanPhase, Point)> {
        let sim = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = HumanModelState::new(cfg);
        let mut out = Vec::new();
        let mut k = 0u64;
        while sim.time_at(k) < until {
            let t = sim.time_at(k);
            let obs = Observation {
                t,
                gauge: 0.0,
                gauge_full: false,
                hazard_active: hazard(t),
                agent_signal: signal(t),
            };
            let a = m.step(cfg, &sim, &obs, &mut rng);
            out.push((sim.time_at(k + 1), m.phase, a.move_to.unwrap()));
            k += 1;
        }
        out
    }

    #[test]
    fn cue_follower_leaves_after_reaction_and_exit_time() {
        let cfg = cue_follower();
        let trace = drive(&cfg, |t| t >= 14.0, |t| t >= 16.0, 16.0);
        let (t_out, _, _) = trace.iter().find(|(_, _, p)| p.norm() > 1.0).unwrap();
        let dt = SimConfig::default().dt;
        assert!((t_out - 15.14).abs() <= 2.0 * dt, "{t_out}");
    }

    #[test]
    fn cue_follower_without_signal_stays_put() {
        let cfg = cue_follower();
        let trace = drive(&cfg, |_| false, |t| (16.0..20.0).contains(&t), 25.0);
        assert!(trace.iter().all(|(_, ph, p)| *ph == HumanPhase::InCenter && p.norm() == 0.0));
    }

    #[test]
    fn noiseless_timer_exits_margin_before_estimate() {
        let cfg = HumanModelConfig {
            kind: HumanKind::InternalTimer,
            timer_noise_sigma: 0.0,
            ..HumanModelConfig::default()
        };
        let hazard = |t: f64| (t % 20.0) >= 16.0;
        let trace = drive(&cfg, |_| false, hazard, 80.0);
        let exits: Vec<f64> = trace
            .windows(2)
            .filter(|w| w[0].1 != HumanPhase::Exiting && w[1].1 == HumanPhase::Exiting)
            .map(|w| w[1].0)
            .collect();
        assert!(exits.len() >= 3, "{exits:?}");
        let dt = SimConfig::default().dt;
        for (i, t) in exits.iter().enumerate() {
            let since_edge = t - 20.0 * i as f64;
            assert!((since_edge - 14.5).abs() <= 2.0 * dt, "{exits:?}");
        }
    }

    #[test]
    fn hybrid_takes_earlier_trigger() {
        let cfg = HumanModelConfig {
            kind: HumanKind::Hybrid,
            timer_noise_sigma: 0.0,
            ..HumanModelConfig::default()
        };
        // Signal far too late: the timer wins at 14.5 s.
        let trace = drive(&cfg, |t| t >= 15.5, |t| t >= 16.0, 16.0);
        let first = trace.iter().find(|(_, ph, _)| *ph == HumanPhase::Exiting).unwrap().0;
        assert!((first - 14.5).abs() < 0.02, "{first}");
        // Early signal wins.
        let trace = drive(&cfg, |t| t >= 10.0, |t| t >= 16.0, 16.0);
        let first = trace.iter().find(|(_, ph, _)| *ph == HumanPhase::Exiting).unwrap().0;
        assert!((first - 10.25).abs() < 0.02, "{first}");
    }

    #[test]
    fn phases_cycle_in_order() {
        let cfg = cue_follower();
        let trace = drive(&cfg, |t| (t % 20.0) >= 14.0 && (t % 20.0) < 16.5, |t| (t % 20.0) >= 16.0, 100.0);
        let mut phases: Vec<HumanPhase> = trace.iter().map(|x| x.1).collect();
        phases.dedup();
        let order = [HumanPhase::InCenter, HumanPhase::Exiting, HumanPhase::Outside, HumanPhase::Returning];
        for pair in phases.windows(2) {
            let a = order.iter().position(|p| *p == pair[0]).unwrap();
            let b = order.iter().position(|p| *p == pair[1]).unwrap();
            assert_eq!(b, (a + 1) % 4, "{phases:?}");
        }
        assert!(phases.len() > 12);
    }

    #[test]
    fn caches_only_in_center() {
        let cfg = HumanModelConfig::default();
        let sim = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = HumanModelState::new(&cfg);
        let obs = Observation { t: 1.0, gauge: 5.0, gauge_full: true, hazard_active: false, agent_signal: false };
        assert!(m.step(&cfg, &sim, &obs, &mut rng).cache);
        m.phase = HumanPhase::Outside;
        assert!(!m.step(&cfg, &sim, &obs, &mut rng).cache);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("cue-follower".parse::<HumanKind>().unwrap(), HumanKind::CueFollower);
        assert_eq!("InternalTimer".parse::<HumanKind>().unwrap(), HumanKind::InternalTimer);
        assert!("oracle".parse::<HumanKind>().is_err());
    }
}
