//! Experiment orchestration for the BVQPCO pipeline.

pub mod config;
pub mod experiment;
pub mod plots;
pub mod svg;

use std::fmt;

pub use config::{ExperimentConfig, Mode};
pub use experiment::{run_experiment, Check, RunReport};

/// Invalid configuration or arguments (exit code 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "validation failed: {}", self.0)
    }
}

impl std::error::Error for ValidationError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

/// Maps an error to its process exit code.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ValidationError>().is_some() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}
