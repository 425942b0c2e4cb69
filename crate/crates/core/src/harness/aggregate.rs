//! Means with percentile-bootstrap confidence intervals.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::IsiCondition;
use crate::harness::config::{AgentKind, TrialId};
use crate::harness::metrics::{PulseRow, TrialRow};

pub const BOOTSTRAP_RESAMPLES: usize = 2000;
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean and percentile-bootstrap CI. `None` for an empty sample.
pub fn bootstrap_mean(samples: &[f64], resamples: usize, level: f64, seed: u64) -> Option<Estimate> {
    if samples.is_empty() {
        return None;
    }
    let m = mean(samples);
    let n = samples.len();
    if n == 1 || samples.iter().all(|&x| x == samples[0]) {
        return Some(Estimate { n, mean: m, ci_lo: m, ci_hi: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Some(Estimate {
        n,
        mean: m,
        ci_lo: quantile_sorted(&means, tail),
        ci_hi: quantile_sorted(&means, 1.0 - tail),
    })
}

/// Bootstrap seed derived from a group key so results do not depend on
/// the order groups are visited.
fn group_seed(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub condition: IsiCondition,
    pub agent: AgentKind,
    pub metric: String,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSummary {
    pub condition: IsiCondition,
    pub agent: AgentKind,
    pub pulse_index: usize,
    pub metric: String,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub pulses: Vec<PulseSummary>,
}

type Samples = Vec<(TrialId, f64)>;

fn estimate(key: &str, mut samples: Samples) -> Option<Estimate> {
    // Canonical order makes the resampling independent of input order.
    samples.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let values: Vec<f64> = samples.into_iter().map(|(_, v)| v).collect();
    bootstrap_mean(&values, BOOTSTRAP_RESAMPLES, CI_LEVEL, group_seed(key))
}

/// Groups trial rows by cell and pulse rows by (cell, pulse index).
pub fn summarize(trials: &[TrialRow], pulses: &[PulseRow]) -> Summary {
    let mut cell_groups: BTreeMap<(IsiCondition, AgentKind, &'static str), Samples> = BTreeMap::new();
    for row in trials {
        let key = (row.id.condition, row.id.agent);
        let p = &row.performance;
        for (name, value) in [
            ("points_norm", p.points_norm),
            ("hit_steps_norm", p.hit_steps_norm),
            ("heat_gain_norm", p.heat_gain_norm),
            ("points_cached", f64::from(p.points_cached)),
            ("hit_steps", p.hit_steps as f64),
            ("heat_gain", p.heat_gain),
        ] {
            cell_groups.entry((key.0, key.1, name)).or_default().push((row.id, value));
        }
        if let Some(idx) = row.reliable_pulse_index {
            cell_groups.entry((key.0, key.1, "reliable_pulse_index")).or_default().push((row.id, idx as f64));
        }
    }
    let mut pulse_groups: BTreeMap<(IsiCondition, AgentKind, usize, &'static str), Samples> = BTreeMap::new();
    for row in pulses {
        let m = &row.metric;
        for (name, value) in [("signal_to_hazard", m.signal_to_hazard), ("signal_to_exit", m.signal_to_exit)] {
            if let Some(v) = value {
                pulse_groups.entry((row.id.condition, row.id.agent, m.index, name)).or_default().push((row.id, v));
            }
        }
    }

    let cells = cell_groups
        .into_iter()
        .filter_map(|((condition, agent, metric), samples)| {
            let key = format!("{condition}:{agent}:{metric}");
            estimate(&key, samples).map(|estimate| CellSummary { condition, agent, metric: metric.to_string(), estimate })
        })
        .collect();
    let pulses = pulse_groups
        .into_iter()
        .filter_map(|((condition, agent, pulse_index, metric), samples)| {
            let key = format!("{condition}:{agent}:{pulse_index}:{metric}");
            estimate(&key, samples)
                .map(|estimate| PulseSummary { condition, agent, pulse_index, metric: metric.to_string(), estimate })
        })
        .collect();
    Summary { cells, pulses }
}
