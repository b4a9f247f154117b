use std::path::PathBuf;

use milp_core::{ModelError, Status};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VppError {
    #[error("{strategy} contract {index} cannot be scheduled: {reason}")]
    UnschedulableContract { strategy: &'static str, index: usize, reason: String },
    #[error("{strategy} contract {index} is malformed: {reason}")]
    MalformedContract { strategy: &'static str, index: usize, reason: String },
    #[error("invalid marginal scenarios: {0}")]
    InvalidMarginals(String),
    #[error("invalid balancing ratio {ratio}: must be at least 1")]
    InvalidRatio { ratio: f64 },
    #[error("model assembly failed: {0}")]
    ModelAssembly(String),
    #[error("{stage}: solver finished with status {status:?}")]
    Solver { stage: String, status: Status },
    #[error("scenario {scenario} is infeasible on its own")]
    ScenarioInfeasible { scenario: usize },
    #[error("relative regret undefined: scenario {scenario} has optimum {optimum} <= 0 (use absolute regret)")]
    RegretUndefined { scenario: usize, optimum: f64 },
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("corrupt decision at hour {hour}: {reason}")]
    CorruptDecision { hour: usize, reason: String },
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    InvalidData { path: PathBuf, source: Box<VppError> },
}

pub type Result<T, E = VppError> = std::result::Result<T, E>;
