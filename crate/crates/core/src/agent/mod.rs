//! Continually learning prediction agent.
//!
//! Each tick the agent reads its temporal representation, predicts the
//! discounted sum of the hazard indicator, signals when that prediction
//! reaches `tau`, and then learns from the transition. Its inputs come only
//! from the hazard schedule, never from the participant.

pub mod gvf;
pub mod repr;

use serde::{Deserialize, Serialize};

pub use gvf::{pavlovian_signal, GvfParams, GvfState, TraceMode};
pub use repr::{bc_feature_index, tct_feature_index, tct_trace_step, ReprKind, ReprParams, ReprState};

use crate::error::Divergence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub prediction: f64,
    pub signal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub repr: ReprState,
    pub gvf: GvfState,
}

impl AgentState {
    /// Fresh agent: representation at a falling edge, zero weights and traces.
    pub fn new(kind: ReprKind, params: ReprParams, dt: f64) -> Self {
        Self { repr: ReprState::new(kind, params, dt), gvf: GvfState::new(params.n_features) }
    }

    pub fn feature_index(&self) -> usize {
        self.repr.feature_index()
    }

    /// Advances the agent by one environment step.
    ///
    /// `hazard_now` is the hazard state of the step just simulated and
    /// `hazard_next` that of the following step. A pulse ending between
    /// them restarts the representation. The returned prediction uses the
    /// weights as they were before this tick's update.
    pub fn tick(
        &mut self,
        hazard_now: bool,
        hazard_next: bool,
        p: &GvfParams,
    ) -> Result<AgentOutput, Divergence> {
        let x_t = self.repr.feature_index();
        let prediction = self.gvf.predict(x_t);
        let signal = pavlovian_signal(prediction, p.tau);

        if hazard_now && !hazard_next {
            self.repr.reset();
        } else {
            self.repr.advance();
        }
        let x_t1 = self.repr.feature_index();
        let cumulant = if hazard_next { 1.0 } else { 0.0 };
        self.gvf.td_lambda_step(p, x_t, x_t1, cumulant)?;
        Ok(AgentOutput { prediction, signal })
    }
}
