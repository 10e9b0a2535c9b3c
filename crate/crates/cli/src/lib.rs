//! Scenario runner for the parabolic solver: loads TOML scenario files, runs
//! the certificates and the solver, and writes plain-text and CSV reports.

pub mod builtin;
pub mod runner;
pub mod scenario;

pub use runner::{run_scenario, run_suite, Certificate, RunOptions, RunSummary, Status, SuiteReport, SuiteRow};
pub use scenario::{InitialGuess, Overrides, RadiusChoice, Scenario};

/// Harness failures outside a scenario's own outcome.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 1,
        }
    }
}
