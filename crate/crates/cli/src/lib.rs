//! Experiment runner: config parsing, the experiment registry, runs with
//! oracle checks, and atomic artifact output.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod registry;
pub mod report;

pub use config::{ConfigError, ConfigErrors, ExperimentConfig};
pub use experiments::{run, RunArtifact, RunError};
pub use registry::Experiment;
pub use report::{Check, Relation, Report};

/// Environment variable naming the directory that run outputs go under.
pub const OUTPUT_ROOT_VAR: &str = "PRINN_OUTPUT_ROOT";
