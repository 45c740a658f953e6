use std::path::PathBuf;

use quadwalk::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Stage(#[from] SimError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for usage and config problems, 1 for I/O, and one
    /// code per pipeline stage otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Stage(e) => stage_code(e),
        }
    }
}

pub fn stage_code(e: &SimError) -> i32 {
    match e {
        SimError::Scenario(_) | SimError::Terrain(_) => 10,
        SimError::BodyPlan(_) => 11,
        SimError::Footstep { .. } => 12,
        SimError::Trajectory { .. } => 20,
        SimError::Dynamics { .. } => 30,
        SimError::Simulation(_) => 40,
    }
}
