//! Sequential MCMC search over per-ring resampling parameters.

mod chain;
mod external;
mod objective;
mod proposal;

use std::path::PathBuf;

use thiserror::Error;

pub use chain::{
    iteration_seed, run_chain, write_json_atomic, Chain, ChainConfig, ChainState, HistoryEntry, WorkspaceLock,
    DEFAULT_DGR_STEP, DEFAULT_ITERATIONS, DEFAULT_SIGMA, DEFAULT_STEP,
};
pub use external::{ExternalObjective, ExternalSpec};
pub use objective::{EvalFailure, Objective, QuadraticSurrogate};
pub use proposal::{accept, AcceptanceRule, Proposal, Proposer};

use crate::metrics::ApVector;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("objective failed at iteration {t}: {message}")]
    ObjectiveFailure { t: usize, message: String },
    #[error("iteration {t}: AP vector {ap:?} is outside [0, 1] or has the wrong length")]
    InvalidApVector { t: usize, ap: ApVector },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("checkpoint does not match this run: {0}")]
    CheckpointMismatch(String),
    #[error("workspace is locked by another process ({0})")]
    WorkspaceLocked(PathBuf),
}
