//! Experiment harness for the tube-network solvers of `tubeflow-core`:
//! JSON configurations, scenario runners, CSV/JSON artifacts with a hashed
//! manifest, and the command line front end.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod graph_file;
pub mod report;
pub mod scenarios;

pub use config::{ExperimentConfig, Scenario};
pub use error::{HarnessError, Result};
pub use report::RunReport;
pub use scenarios::{run, RunOptions};
