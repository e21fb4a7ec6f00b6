//! CLI, experiment configuration, seeded execution, and CSV/JSON
//! persistence for the verification campaigns.

pub mod cli;
pub mod config;
pub mod runner;

pub use config::{CellSpec, DistSpec, ExperimentConfig, Mode, ModelSpec, PSchedule, Sweep, Thresholds};
pub use runner::{run, Record, RunResult};
