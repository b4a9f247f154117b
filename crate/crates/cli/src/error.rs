use std::path::PathBuf;

use thiserror::Error;
use vpp_core::VppError;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: VppError,
    },
    #[error("{}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } => match source {
                VppError::Io { .. } => EXIT_IO,
                VppError::Solver { .. } | VppError::ScenarioInfeasible { .. } | VppError::InternalInconsistency(_) => {
                    EXIT_SOLVER
                }
                _ => EXIT_VALIDATION,
            },
            CliError::Write { .. } => EXIT_IO,
            CliError::Usage(_) => EXIT_VALIDATION,
        }
    }
}

/// Tags a core error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for Result<T, VppError> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
