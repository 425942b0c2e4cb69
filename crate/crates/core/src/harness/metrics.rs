//! Per-pulse timing metrics and whole-trial performance.
//!
//! Each pulse owns the window from the previous falling edge (or trial
//! start) up to its onset. Within that window we look for the last rising
//! edge of the agent signal and the last outward crossing of the center
//! disc boundary.

use serde::{Deserialize, Serialize};

use crate::env::SimConfig;
use crate::harness::config::{AgentKind, TrialId};
use crate::harness::trial::{StepRecord, TrialLog};

/// Minimum lead that leaves time to walk out of the hazard disc.
pub const USEFUL_LEAD: f64 = 0.89;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseMetric {
    /// Zero-based pulse index within the trial.
    pub index: usize,
    pub onset_t: f64,
    pub signal_rise_t: Option<f64>,
    pub signal_to_hazard: Option<f64>,
    pub exit_t: Option<f64>,
    pub signal_to_exit: Option<f64>,
    pub useful: bool,
    pub hit_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPerformance {
    pub points_cached: u32,
    pub points_norm: f64,
    pub hit_steps: u64,
    pub hit_steps_norm: f64,
    pub heat_gain: f64,
    pub heat_gain_norm: f64,
}

struct Window {
    start: usize,
    onset: usize,
    end: usize,
}

fn windows(log: &TrialLog) -> Vec<Window> {
    let steps = &log.steps;
    let first_at = |t: f64| steps.partition_point(|r| r.t < t);
    let mut prev_fall = 0.0;
    log.pulses
        .iter()
        .map(|p| {
            let w = Window { start: first_at(prev_fall), onset: first_at(p.onset_t), end: first_at(p.falling_t) };
            prev_fall = p.falling_t;
            w
        })
        .collect()
}

fn last_rise(steps: &[StepRecord], w: &Window) -> Option<usize> {
    (w.start..w.onset)
        .rev()
        .find(|&k| steps[k].signal && (k == 0 || !steps[k - 1].signal))
}

fn last_exit(steps: &[StepRecord], w: &Window, center_radius: f64) -> Option<usize> {
    (w.start..w.onset).rev().find(|&k| {
        let before = if k == 0 { 0.0 } else { steps[k - 1].pos.norm() };
        before <= center_radius && steps[k].pos.norm() > center_radius
    })
}

/// Lead of the agent's last signal rise over each pulse onset.
pub fn signal_to_hazard_intervals(log: &TrialLog) -> Vec<Option<f64>> {
    windows(log)
        .iter()
        .zip(&log.pulses)
        .map(|(w, p)| last_rise(&log.steps, w).map(|k| p.onset_t - log.steps[k].t))
        .collect()
}

/// Exit time minus signal rise time, per pulse. Negative when the
/// participant left before the cue.
pub fn signal_to_exit_intervals(log: &TrialLog, center_radius: f64) -> Vec<Option<f64>> {
    windows(log)
        .iter()
        .map(|w| {
            let rise = last_rise(&log.steps, w)?;
            let exit = last_exit(&log.steps, w, center_radius)?;
            Some(log.steps[exit].t - log.steps[rise].t)
        })
        .collect()
}

pub fn pulse_metrics(log: &TrialLog, sim: &SimConfig) -> Vec<PulseMetric> {
    let steps = &log.steps;
    windows(log)
        .iter()
        .zip(&log.pulses)
        .map(|(w, p)| {
            let rise = last_rise(steps, w);
            let exit = last_exit(steps, w, sim.center_radius);
            let signal_to_hazard = rise.map(|k| p.onset_t - steps[k].t);
            PulseMetric {
                index: p.index,
                onset_t: p.onset_t,
                signal_rise_t: rise.map(|k| steps[k].t),
                signal_to_hazard,
                exit_t: exit.map(|k| steps[k].t),
                signal_to_exit: rise.zip(exit).map(|(r, e)| steps[e].t - steps[r].t),
                useful: signal_to_hazard.is_some_and(|lead| lead >= USEFUL_LEAD),
                hit_steps: steps[w.onset..w.end.min(steps.len())].iter().filter(|r| r.being_hit).count() as u64,
            }
        })
        .collect()
}

/// One-based index of the first pulse from which every later pulse got a
/// useful signal. `None` if the final pulse was not usefully signalled.
pub fn reliable_pulse_index(metrics: &[PulseMetric]) -> Option<usize> {
    let useful_tail = metrics.iter().rev().take_while(|m| m.useful).count();
    (useful_tail > 0).then(|| metrics.len() - useful_tail + 1)
}

/// Mean signal-to-hazard lead over pulses with zero-based index >= `from`.
pub fn mean_lead_from(metrics: &[PulseMetric], from: usize) -> Option<f64> {
    let leads: Vec<f64> = metrics.iter().filter(|m| m.index >= from).filter_map(|m| m.signal_to_hazard).collect();
    (!leads.is_empty()).then(|| leads.iter().sum::<f64>() / leads.len() as f64)
}

pub fn trial_performance(log: &TrialLog, sim: &SimConfig) -> TrialPerformance {
    let points_cached = log.steps.last().map_or(0, |r| r.points);
    let hit_steps = log.steps.iter().filter(|r| r.being_hit).count() as u64;
    let hazard_steps = log.steps.iter().filter(|r| r.hazard_active).count() as u64;
    let center_steps = log.steps.iter().filter(|r| r.pos.norm() <= sim.center_radius).count();
    let heat_gain = center_steps as f64 * sim.fill_rate * sim.dt;
    let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
    TrialPerformance {
        points_cached,
        points_norm: ratio(f64::from(points_cached), f64::from(sim.max_points())),
        hit_steps,
        hit_steps_norm: ratio(hit_steps as f64, hazard_steps as f64),
        heat_gain,
        heat_gain_norm: ratio(heat_gain, sim.max_heat_gain()),
    }
}

/// Flat per-pulse row for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRow {
    #[serde(flatten)]
    pub id: TrialId,
    pub seed: u64,
    #[serde(flatten)]
    pub metric: PulseMetric,
}

/// Flat per-trial row for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    #[serde(flatten)]
    pub id: TrialId,
    pub seed: u64,
    pub complete: bool,
    pub n_pulses: usize,
    pub reliable_pulse_index: Option<usize>,
    #[serde(flatten)]
    pub performance: TrialPerformance,
}

/// Identity of a log for export; falls back to session/trial 0 for
/// ad-hoc and live-session logs.
pub fn trial_id(log: &TrialLog) -> TrialId {
    TrialId {
        session: log.header.session.unwrap_or(0),
        trial: log.header.trial.unwrap_or(0),
        condition: log.header.condition,
        agent: log.header.agent,
    }
}

pub fn rows_for(log: &TrialLog, sim: &SimConfig) -> (TrialRow, Vec<PulseRow>) {
    let id = trial_id(log);
    let metrics = pulse_metrics(log, sim);
    let reliable = if log.header.agent == AgentKind::None { None } else { reliable_pulse_index(&metrics) };
    let trial = TrialRow {
        id,
        seed: log.header.seed,
        complete: log.header.complete,
        n_pulses: metrics.len(),
        reliable_pulse_index: reliable,
        performance: trial_performance(log, sim),
    };
    let pulses = metrics.into_iter().map(|metric| PulseRow { id, seed: log.header.seed, metric }).collect();
    (trial, pulses)
}
