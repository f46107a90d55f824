//! Experiment runner for `qprior`: JSON configs, outcome streams, the two
//! canned experiments, and CSV/JSON output.

pub mod config;
pub mod error;
pub mod outcomes;
pub mod presets;
pub mod run;

pub use config::{parse_config, ConfigErrors, ExperimentConfig};
pub use error::CliError;
pub use outcomes::{sample_outcomes, OutcomeStream};
pub use run::{emit_results, execute, simulate, write_csv, Report};
