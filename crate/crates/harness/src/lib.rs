//! Experiment harness for `rcmdp-core`: TOML configs and spec files, training
//! and robustness-sweep runs, CSV output and an invariant checker.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod spec_file;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::Experiment;
