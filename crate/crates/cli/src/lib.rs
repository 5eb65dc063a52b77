//! Scenario-driven front end for the chargecap numerical core.

pub mod commands;
pub mod config;

use thiserror::Error;

/// Process exit codes: 0 success, 2 invalid configuration, 3 numerical
/// failure, 1 anything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<chargecap_core::Error> for CliError {
    fn from(e: chargecap_core::Error) -> Self {
        use chargecap_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::InvalidMenu(_) | E::InfeasibleTargetDwell { .. } => {
                CliError::Config(e.to_string())
            }
            E::QuadratureNonConvergence { .. } | E::SampleBudget { .. } | E::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
