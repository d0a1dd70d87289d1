//! Experiment configuration, orchestration and artifact output.

mod compare;
mod config;
mod experiment;
pub mod output;

pub use compare::{compare_micro_macro, default_test_functions, GapRow, MicroAverages};
pub use config::{ExperimentConfig, Mode, KNOWN_KEYS};
pub use experiment::{config_from_manifest, manifest, run_experiment, RunReport, TOOL_NAME};
pub use output::{format_number, read_field_csv, read_fields_csv, SeriesTable};
