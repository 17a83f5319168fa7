//! Experiment harness for the `portkey` samplers: configured replication
//! sweeps written as CSV, a self-validation report and synthetic data
//! generation.

pub mod cli;
pub mod config;
pub mod data;
pub mod gen_data;
pub mod run;
pub mod validate;

pub use config::ExperimentConfig;
pub use gen_data::{cmd_gen_data, Structure};
pub use run::{aggregate, cmd_run, RunReport, SummaryRow};
pub use validate::{cmd_validate, ValidateOptions};
