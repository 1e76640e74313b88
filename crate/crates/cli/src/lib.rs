//! Experiment front-end for `recsim`: config parsing, named presets and
//! the runner that writes traces and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod presets;
pub mod run;

pub use config::{parse_config, render, ConfigError, ConfigErrors, ExperimentConfig, Mode, StartPoint};
pub use run::{run_experiment, RunError, RunOutcome};
