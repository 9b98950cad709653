//! Benchmark designs with known conditional modes, the two integrated error
//! metrics, and a seeded Monte Carlo runner.

mod config;
mod experiment;
mod metrics;

pub use config::{
    base_mean, generate, true_modes, Branch, Component, ConfigTag, SimulationConfig,
};
pub use experiment::{
    aggregate, replicate_seed, run_experiment, run_experiment_with, Aggregate, ExperimentReport,
    ExperimentSettings, ReportRow, TimingRow, REPORT_SCHEMA_VERSION,
};
pub use metrics::{
    eise_d, eise_d_kernel, eise_m, eise_m_against, true_mode_grid, EiseM, EvalGrid,
};
