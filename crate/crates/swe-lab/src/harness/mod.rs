//! Experiment configs, dispatch, and artifact emission for the CLI.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{load_config, parse_config, EtaPolicy, ExperimentConfig, Overrides};
pub use report::{summarize, RunReport};
pub use runner::{resolve_out_dir, run, RunArtifacts};
