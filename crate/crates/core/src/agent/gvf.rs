//! Linear GVF over one-hot features, trained with TD(lambda).

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Divergence};

/// How the eligibility trace absorbs the active feature each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    /// `e[x] = 1`. Bounded by one, stable at the default parameters.
    #[default]
    Replacing,
    /// `e[x] += 1`. Grows towards `1 / (1 - gamma * lambda)` while a
    /// feature stays active, which at alpha = 0.1 and gamma = lambda = 0.99
    /// makes the updates overshoot and diverge.
    Accumulating,
}

/// Learning and signalling parameters, all per environment step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GvfParams {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Signal threshold on the prediction.
    pub tau: f64,
    pub trace: TraceMode,
}

impl Default for GvfParams {
    fn default() -> Self {
        Self { alpha: 0.1, lambda: 0.99, gamma: 0.99, tau: 10.0, trace: TraceMode::Replacing }
    }
}

impl GvfParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ConfigError::invalid(format!("gvf.alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(ConfigError::invalid(format!("gvf.lambda must lie in [0, 1), got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::invalid(format!("gvf.gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ConfigError::invalid(format!("gvf.tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GvfState {
    pub w: Vec<f64>,
    pub e: Vec<f64>,
}

impl GvfState {
    pub fn new(n_features: usize) -> Self {
        Self { w: vec![0.0; n_features], e: vec![0.0; n_features] }
    }

    pub fn n_features(&self) -> usize {
        self.w.len()
    }

    /// `w . x` for a one-hot `x`.
    pub fn predict(&self, x_index: usize) -> f64 {
        self.w[x_index]
    }

    /// One TD(lambda) update from `x_t` to `x_t1` with cumulant `c_t1`.
    ///
    /// Order: mark the trace, compute the TD error with the current
    /// weights, step the weights along the trace, decay the trace.
    /// Returns the TD error.
    pub fn td_lambda_step(
        &mut self,
        p: &GvfParams,
        x_t: usize,
        x_t1: usize,
        c_t1: f64,
    ) -> Result<f64, Divergence> {
        match p.trace {
            TraceMode::Replacing => self.e[x_t] = 1.0,
            TraceMode::Accumulating => self.e[x_t] += 1.0,
        }
        let delta = c_t1 + p.gamma * self.w[x_t1] - self.w[x_t];
        if !delta.is_finite() {
            return Err(Divergence {
                detail: format!("non-finite TD error at features {x_t}->{x_t1}"),
            });
        }
        let step = p.alpha * delta;
        let decay = p.gamma * p.lambda;
        for (w, e) in self.w.iter_mut().zip(self.e.iter_mut()) {
            *w += step * *e;
            *e *= decay;
        }
        if let Some(i) = self.w.iter().position(|w| !w.is_finite()) {
            return Err(Divergence { detail: format!("weight {i} became non-finite") });
        }
        Ok(delta)
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.w.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// Fixed reflex: signal while the prediction is at or above `tau`.
pub fn pavlovian_signal(prediction: f64, tau: f64) -> bool {
    prediction >= tau
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight transcription of a single TD(lambda) update on dense
    /// vectors, written independently of `td_lambda_step`.
    #[allow(clippy::too_many_arguments)]
    fn reference_step(
        w: &mut [f64],
        e: &mut [f64],
        x: &[f64],
        x1: &[f64],
        c: f64,
        alpha: f64,
        gamma: f64,
        lambda: f64,
    ) -> f64 {
        for (ei, xi) in e.iter_mut().zip(x) {
            *ei += xi;
        }
        let v: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        let v1: f64 = w.iter().zip(x1).map(|(a, b)| a * b).sum();
        let delta = c + gamma * v1 - v;
        for (wi, ei) in w.iter_mut().zip(e.iter()) {
            *wi += alpha * delta * ei;
        }
        for ei in e.iter_mut() {
            *ei *= gamma * lambda;
        }
        delta
    }

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn zero_state_self_transition() {
        let mut g = GvfState::new(40);
        let delta = g.td_lambda_step(&GvfParams::default(), 5, 5, 0.0).unwrap();
        assert_eq!(delta, 0.0);
        assert!(g.w.iter().all(|&w| w == 0.0));
        assert!((g.e[5] - 0.9801).abs() < 1e-15);
    }

    #[test]
    fn single_step_matches_reference() {
        let mut g = GvfState::new(40);
        let delta = g.td_lambda_step(&GvfParams::default(), 3, 4, 1.0).unwrap();

        let (mut w, mut e) = (vec![0.0; 40], vec![0.0; 40]);
        let ref_delta =
            reference_step(&mut w, &mut e, &one_hot(40, 3), &one_hot(40, 4), 1.0, 0.1, 0.99, 0.99);
        assert_eq!(delta, 1.0);
        assert_eq!(ref_delta, 1.0);
        assert!((g.w[3] - 0.1).abs() < 1e-15);
        assert!(g.w.iter().enumerate().all(|(i, &v)| i == 3 || v == 0.0));
        assert_eq!(g.w, w);
    }

    #[test]
    fn accumulating_mode_matches_reference_over_a_sequence() {
        let p = GvfParams { trace: TraceMode::Accumulating, ..GvfParams::default() };
        let seq = [0usize, 0, 1, 1, 2, 3, 3, 3, 0, 1];
        let cum = [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let mut g = GvfState::new(4);
        let (mut w, mut e) = (vec![0.0; 4], vec![0.0; 4]);
        for (i, pair) in seq.windows(2).enumerate() {
            let d = g.td_lambda_step(&p, pair[0], pair[1], cum[i]).unwrap();
            let rd = reference_step(
                &mut w,
                &mut e,
                &one_hot(4, pair[0]),
                &one_hot(4, pair[1]),
                cum[i],
                p.alpha,
                p.gamma,
                p.lambda,
            );
            assert!((d - rd).abs() < 1e-12);
        }
        for (a, b) in g.w.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn replacing_trace_is_capped_at_one() {
        let mut g = GvfState::new(2);
        let p = GvfParams::default();
        for _ in 0..1000 {
            g.td_lambda_step(&p, 0, 0, 0.0).unwrap();
        }
        assert!((g.e[0] - 0.9801).abs() < 1e-12);
    }

    #[test]
    fn constant_cumulant_converges_to_geometric_sum() {
        for trace in [TraceMode::Replacing, TraceMode::Accumulating] {
            let p = GvfParams { trace, ..GvfParams::default() };
            let mut g = GvfState::new(1);
            for _ in 0..50_000 {
                g.td_lambda_step(&p, 0, 0, 1.0).unwrap();
            }
            let target = 1.0 / (1.0 - p.gamma);
            assert!((g.predict(0) - target).abs() / target < 0.01, "{trace:?}: {}", g.predict(0));
        }
    }

    #[test]
    fn non_finite_cumulant_is_reported() {
        let mut g = GvfState::new(3);
        let err = g.td_lambda_step(&GvfParams::default(), 0, 1, f64::NAN).unwrap_err();
        assert!(err.detail.contains("TD error"));
    }

    #[test]
    fn threshold_is_inclusive() {
        assert!(pavlovian_signal(10.0, 10.0));
        assert!(!pavlovian_signal(0.0, 10.0));
        assert!(pavlovian_signal(99.34, 10.0));
        assert!(!pavlovian_signal(9.999, 10.0));
    }

    #[test]
    fn one_hot_prediction() {
        let mut g = GvfState::new(40);
        assert_eq!(g.predict(12), 0.0);
        g.w[7] = 3.5;
        assert_eq!(g.predict(7), 3.5);
    }

    #[test]
    fn param_validation() {
        assert!(GvfParams::default().validate().is_ok());
        assert!(GvfParams { gamma: 1.0, ..GvfParams::default() }.validate().is_err());
        assert!(GvfParams { alpha: 0.0, ..GvfParams::default() }.validate().is_err());
        assert!(GvfParams { tau: -1.0, ..GvfParams::default() }.validate().is_err());
    }
}
