//! Library side of the `stein` command-line tool: config resolution,
//! method dispatch and the `generate` / `evaluate` / `sweep` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

pub use commands::{cmd_evaluate, cmd_generate, cmd_sweep, Outcome};
pub use config::{load_config, parse_config, resolve, ExperimentConfig, Method, Plan};
pub use error::CliError;
pub use run::{reference_sample, run_method, RunOutput};
