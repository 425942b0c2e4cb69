//! Frost Hollow: a deterministic time-interval prediction task with
//! continually learning GVF agents that cue a participant before each
//! hazard pulse.
//!
//! * [`env`]: fixed-timestep environment and hazard schedules.
//! * [`agent`]: temporal representations, TD(lambda) GVF, threshold signal.
//! * [`human`]: scripted participant models.
//! * [`harness`]: trial runner, metrics, bootstrap summaries, JSONL export.
//! * [`session`]: wall-clock-free live session state machine and wire messages.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod human;
pub mod session;

pub use error::{ConfigError, Divergence, Error, Result};
