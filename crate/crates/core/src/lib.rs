//! Deterministic ring-road traffic simulation with one instrumented ego car
//! driven under manual, haptic shared, or automated longitudinal control.
//!
//! A session is configured by [`ScenarioConfig`], run by [`Simulation`] (or
//! [`run_session`] in batch), recorded in a [`SessionLog`], and summarized by
//! [`compute_metrics`]. [`run_cohort`] repeats sessions over participants and
//! conditions, and [`analyze`] compares them.

pub mod cohort;
pub mod config;
pub mod error;
pub mod follower_stopper;
pub mod human;
pub mod log;
pub mod metrics;
pub mod pedal;
pub mod ring;
pub mod scenario;
pub mod stats;
pub mod traffic;

pub use cohort::{analyze, run_cohort, CohortSpec, SessionResult, StatsReport};
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use log::{EndReason, Event, EventKind, SessionLog};
pub use metrics::{compute_metrics, SessionMetrics};
pub use pedal::Condition;
pub use scenario::{run_session, run_session_with_inputs, HumanInput, PedalCommand, Simulation, StepOutcome};
