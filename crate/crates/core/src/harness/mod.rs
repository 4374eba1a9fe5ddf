//! Experiment configuration, Monte-Carlo sweeps and CSV output.

pub mod config;
pub mod runner;
pub mod units;

pub use config::{load_config, parse_config, Architecture, ExperimentConfig, Preset, Scenario};
pub use runner::{aggregate, run_experiment, run_trials, AggregateRow, JobResult, ResultRow, RunSummary, TrialStatus};
