//! Limit-theorem experiments, law suites, acceptance criteria and the
//! plumbing behind the `mlz` command-line tool.

pub mod config;
pub mod criteria;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod laws;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use experiments::{run_bg_experiment, run_diffusive_experiment, EmpiricalSummary};
pub use laws::run_law_suite;
