//! One-hot temporal representations that restart at each falling edge.
//!
//! The bit cascade steps through equal-width time bins. The tile-coded
//! trace tiles a saturating trace `1 - decay^n` uniformly, so its bins get
//! wider the longer it has been since the last pulse.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReprKind {
    BitCascade,
    TileCodedTrace,
}

/// Representation parameters. `trace_decay` is a per-step factor and is
/// only meaningful together with the simulation `dt` it was tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReprParams {
    pub n_features: usize,
    pub bc_bin_seconds: f64,
    pub trace_decay: f64,
}

impl Default for ReprParams {
    fn default() -> Self {
        Self { n_features: 40, bc_bin_seconds: 0.5, trace_decay: 0.998 }
    }
}

impl ReprParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_features == 0 {
            return Err(ConfigError::invalid("repr.n_features must be >= 1"));
        }
        if !(self.bc_bin_seconds.is_finite() && self.bc_bin_seconds > 0.0) {
            return Err(ConfigError::invalid("repr.bc_bin_seconds must be > 0"));
        }
        if !(self.trace_decay > 0.0 && self.trace_decay < 1.0) {
            return Err(ConfigError::invalid("repr.trace_decay must lie in (0, 1)"));
        }
        Ok(())
    }
}

pub fn bc_feature_index(steps_since_edge: u64, dt: f64, bin_seconds: f64, n_features: usize) -> usize {
    let bin = (steps_since_edge as f64 * dt / bin_seconds).floor() as usize;
    bin.min(n_features - 1)
}

pub fn tct_trace_step(trace: f64, decay: f64) -> f64 {
    1.0 - decay * (1.0 - trace)
}

pub fn tct_feature_index(trace: f64, n_features: usize) -> usize {
    ((trace * n_features as f64).floor().max(0.0) as usize).min(n_features - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprState {
    pub kind: ReprKind,
    pub params: ReprParams,
    pub dt: f64,
    pub steps_since_edge: u64,
    pub trace: f64,
}

impl ReprState {
    pub fn new(kind: ReprKind, params: ReprParams, dt: f64) -> Self {
        Self { kind, params, dt, steps_since_edge: 0, trace: 0.0 }
    }

    pub fn feature_index(&self) -> usize {
        match self.kind {
            ReprKind::BitCascade => bc_feature_index(
                self.steps_since_edge,
                self.dt,
                self.params.bc_bin_seconds,
                self.params.n_features,
            ),
            ReprKind::TileCodedTrace => tct_feature_index(self.trace, self.params.n_features),
        }
    }

    pub fn advance(&mut self) {
        self.steps_since_edge += 1;
        self.trace = tct_trace_step(self.trace, self.params.trace_decay);
    }

    pub fn reset(&mut self) {
        self.steps_since_edge = 0;
        self.trace = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DT: f64 = 0.008;

    #[test]
    fn bc_bins() {
        assert_eq!(bc_feature_index(0, DT, 0.5, 40), 0);
        assert_eq!(bc_feature_index(75, DT, 0.5, 40), 1);
        assert_eq!(bc_feature_index(3750, DT, 0.5, 40), 39);
    }

    #[test]
    fn tct_single_steps() {
        assert!((tct_trace_step(0.0, 0.998) - 0.002).abs() < 1e-15);
        assert!((tct_trace_step(0.5, 0.998) - 0.501).abs() < 1e-15);
    }

    #[test]
    fn tct_iterated_matches_closed_form() {
        let mut trace = 0.0;
        for _ in 0..2500 {
            trace = tct_trace_step(trace, 0.998);
        }
        let closed = 1.0 - 0.998f64.powi(2500);
        assert!((trace - closed).abs() < 1e-12);
        assert!((trace - 0.99330).abs() < 1e-5);
    }

    #[test]
    fn tct_bins() {
        assert_eq!(tct_feature_index(0.0, 40), 0);
        assert_eq!(tct_feature_index(0.99330, 40), 39);
        assert_eq!(tct_feature_index(0.024999, 40), 0);
        assert_eq!(tct_feature_index(0.025, 40), 1);
    }

    fn dwell_times(kind: ReprKind, steps: u64) -> Vec<u64> {
        let mut state = ReprState::new(kind, ReprParams::default(), DT);
        let mut dwell = vec![0u64; 40];
        for _ in 0..steps {
            dwell[state.feature_index()] += 1;
            state.advance();
        }
        dwell
    }

    #[test]
    fn twenty_seconds_spans_all_bins_for_both() {
        // 20 s at 8 ms.
        let bc = dwell_times(ReprKind::BitCascade, 2500);
        assert!(bc.iter().all(|&d| d > 0));

        let mut tct = ReprState::new(ReprKind::TileCodedTrace, ReprParams::default(), DT);
        for _ in 0..2500 {
            tct.advance();
        }
        assert_eq!(tct.feature_index(), 39);
    }

    #[test]
    fn dwell_times_widen_for_tct_and_stay_flat_for_bc() {
        let bc = dwell_times(ReprKind::BitCascade, 2500);
        // 0.5 s bins at 8 ms alternate between 62 and 63 steps.
        assert!(bc[..39].iter().all(|&d| d == 62 || d == 63));

        let tct = dwell_times(ReprKind::TileCodedTrace, 100_000);
        // Integer step counts can tie between neighbouring bins.
        assert!(tct[..39].windows(2).all(|p| p[1] >= p[0]), "{tct:?}");
        assert!(tct[38] > 10 * tct[0], "{tct:?}");
    }

    #[test]
    fn reset_restarts_at_bin_zero() {
        for kind in [ReprKind::BitCascade, ReprKind::TileCodedTrace] {
            let mut state = ReprState::new(kind, ReprParams::default(), DT);
            for _ in 0..1000 {
                state.advance();
            }
            assert!(state.feature_index() > 0);
            state.reset();
            assert_eq!(state.feature_index(), 0);
        }
    }

    proptest! {
        #[test]
        fn trace_rises_and_stays_below_one(steps in 0usize..20_000) {
            let mut trace = 0.0;
            for _ in 0..steps {
                let next = tct_trace_step(trace, 0.998);
                prop_assert!(next >= trace);
                trace = next;
            }
            prop_assert!((0.0..1.0).contains(&trace));
            prop_assert!(tct_feature_index(trace, 40) < 40);
        }

        #[test]
        fn bc_index_in_range(steps in 0u64..1_000_000) {
            prop_assert!(bc_feature_index(steps, DT, 0.5, 40) < 40);
        }
    }
}
