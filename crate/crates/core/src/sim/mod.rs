//! Continuous-time event-driven simulation of a fully-meshed network.

pub mod diagnostic;
pub mod engine;
pub mod grid;

pub use diagnostic::{
    bridge_sigmas, normality_diagnostic, pco_first_cycle_updates, phase_after_update,
    FirstCycleReport, NormalityReport,
};
pub use engine::{
    initial_phases, run_trial, run_trial_observed, Event, NoopObserver, Observer, SimConfig,
    TrialRecord, DEFAULT_DETECTION_WINDOW, DEFAULT_MAX_CYCLES,
};
pub use grid::{run_grid, run_trials, summarize, GridSummary};
