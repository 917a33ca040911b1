//! Configuration, training, evaluation and logging behind the `molforge`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod run;
pub mod runlog;

use thiserror::Error;

use molforge_core::molgraph::ParseError;
use molforge_core::properties::PropertyError;
use molforge_core::qlearn::QError;
use molforge_core::rewards::RewardError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("cannot parse molecule {text:?}: {source}")]
    Molecule { text: String, source: ParseError },
    #[error(transparent)]
    Learning(#[from] QError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for usage and configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Molecule { .. } => 1,
            _ => 2,
        }
    }
}

pub fn parse_molecule(text: &str) -> Result<molforge_core::molgraph::Molecule, CliError> {
    molforge_core::molgraph::parse_smiles(text).map_err(|source| CliError::Molecule {
        text: text.to_string(),
        source,
    })
}
