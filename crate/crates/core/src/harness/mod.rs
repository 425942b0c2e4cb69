//! Experiment runner, metrics and export.

pub mod aggregate;
pub mod config;
pub mod export;
pub mod metrics;
pub mod trial;

use rayon::prelude::*;

pub use aggregate::{bootstrap_mean, summarize, Estimate, Summary};
pub use config::{parse_cells, trial_seed, AgentKind, Cell, ExperimentConfig, TrialId};
pub use metrics::{
    pulse_metrics, reliable_pulse_index, signal_to_exit_intervals, signal_to_hazard_intervals,
    trial_performance, PulseMetric, TrialPerformance, USEFUL_LEAD,
};
pub use trial::{run_trial, run_trial_with, Participant, Replay, ScriptedHuman, StepRecord, TrialLog, TrialRunner};

use crate::error::Error;

/// Every trial of the grid, in canonical order.
pub fn trial_ids(cells: &[Cell], sessions: u32, trials_per_cell: u32) -> Vec<TrialId> {
    let mut ids: Vec<TrialId> = (0..sessions)
        .flat_map(|session| {
            cells.iter().flat_map(move |cell| {
                (0..trials_per_cell).map(move |trial| TrialId {
                    session,
                    trial,
                    condition: cell.condition,
                    agent: cell.agent,
                })
            })
        })
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Runs one trial of the grid with its derived seed.
pub fn run_grid_trial(cfg: &ExperimentConfig, id: &TrialId) -> Result<TrialLog, Error> {
    let seed = trial_seed(cfg.base_seed, id);
    let tag = |log: &mut TrialLog| {
        log.header.session = Some(id.session);
        log.header.trial = Some(id.trial);
    };
    match run_trial(cfg, id.condition, id.agent, seed) {
        Ok(mut log) => {
            tag(&mut log);
            Ok(log)
        }
        Err(Error::Diverged { step, source, partial }) => Err(Error::Diverged {
            step,
            source,
            partial: partial.map(|mut log| {
                tag(&mut log);
                log
            }),
        }),
        Err(e) => Err(e),
    }
}

/// Runs the grid in parallel. Results come back in canonical trial order.
pub fn run_experiment(cfg: &ExperimentConfig, cells: &[Cell]) -> Vec<(TrialId, Result<TrialLog, Error>)> {
    trial_ids(cells, cfg.sessions, cfg.trials_per_cell)
        .into_par_iter()
        .map(|id| (id, run_grid_trial(cfg, &id)))
        .collect()
}
