//! The sequential chain: propose, evaluate, accept/reject, track the best.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::Objective;
use super::proposal::{accept, AcceptanceRule, Proposer};
use super::McmcError;
use crate::metrics::ApVector;
use crate::resampling::{ResampleMethod, ResampleParams, SensorSpec};

pub const DEFAULT_STEP: f64 = 0.05;
/// DGR resolutions step on a finer lattice so that values such as 0.475 are
/// reachable from the 1.0 start.
pub const DEFAULT_DGR_STEP: f64 = 0.025;
pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub seed: u64,
    pub step: f64,
    pub sigma: f64,
    pub acceptance: AcceptanceRule,
    pub lower: f64,
    pub upper: f64,
}

impl ChainConfig {
    /// Defaults for a method: box from the parameter validity range and the
    /// method's lattice step.
    pub fn for_method(method: ResampleMethod, sensor: &SensorSpec, seed: u64) -> Self {
        let (lower, upper) = ResampleParams::bounds(method, sensor);
        Self {
            n_iter: DEFAULT_ITERATIONS,
            seed,
            step: match method {
                ResampleMethod::Dgr => DEFAULT_DGR_STEP,
                _ => DEFAULT_STEP,
            },
            sigma: DEFAULT_SIGMA,
            acceptance: AcceptanceRule::Metropolis,
            lower,
            upper,
        }
    }

    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: &str| Err(McmcError::InvalidConfig(m.to_string()));
        if self.n_iter == 0 {
            return bad("n_iter must be at least 1");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.lower <= self.upper) {
            return bad("lower bound exceeds upper bound");
        }
        Ok(())
    }

    /// Same chain dynamics (everything except the iteration budget).
    fn compatible(&self, other: &ChainConfig) -> bool {
        ChainConfig {
            n_iter: other.n_iter,
            ..self.clone()
        } == *other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: usize,
    pub proposal: Vec<f64>,
    pub ring: usize,
    pub delta: f64,
    pub degenerate: bool,
    pub ap: ApVector,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Full chain state; this is what `chain.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub t: usize,
    pub config: ChainConfig,
    pub init: ResampleParams,
    pub theta_current: ResampleParams,
    pub theta_best: ResampleParams,
    pub p_current: ApVector,
    pub p_best: ApVector,
    pub accept_count: usize,
    pub objective: serde_json::Value,
    pub history: Vec<HistoryEntry>,
}

/// Seed of the generator used in iteration `t`. Each iteration owns its
/// stream, so a resumed chain needs nothing beyond `t`.
pub fn iteration_seed(seed: u64, t: usize) -> u64 {
    let mut z = seed.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct Chain {
    state: ChainState,
    proposer: Proposer,
    checkpoint: Option<PathBuf>,
}

impl Chain {
    pub fn new(init: ResampleParams, config: ChainConfig, objective: &dyn Objective) -> Result<Self, McmcError> {
        config.validate()?;
        if init.values.is_empty() {
            return Err(McmcError::InvalidConfig("empty initial θ".into()));
        }
        let rings = init.values.len();
        let state = ChainState {
            t: 0,
            config,
            init: init.clone(),
            theta_current: init.clone(),
            theta_best: init,
            p_current: ApVector::zeros(rings),
            p_best: ApVector::zeros(rings),
            accept_count: 0,
            objective: objective.descriptor(),
            history: Vec::new(),
        };
        Ok(Self::from_state(state))
    }

    fn from_state(state: ChainState) -> Self {
        let c = &state.config;
        let proposer = Proposer::new(c.step, c.sigma, c.lower, c.upper, state.init.values.clone());
        Self {
            state,
            proposer,
            checkpoint: None,
        }
    }

    /// Loads `chain.json`. `config` must match the checkpointed dynamics;
    /// its `n_iter` replaces the stored budget.
    pub fn resume(path: &Path, config: ChainConfig) -> Result<Self, McmcError> {
        let text = fs::read_to_string(path).map_err(|e| McmcError::Checkpoint {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut state: ChainState = serde_json::from_str(&text).map_err(|e| McmcError::Checkpoint {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if !state.config.compatible(&config) {
            return Err(McmcError::CheckpointMismatch(
                "chain settings differ from the checkpoint".into(),
            ));
        }
        if state.history.len() != state.t {
            return Err(McmcError::CheckpointMismatch("history length differs from t".into()));
        }
        state.config.n_iter = config.n_iter;
        let mut chain = Self::from_state(state);
        chain.checkpoint = Some(path.to_path_buf());
        Ok(chain)
    }

    /// Refuses to continue a chain against a different objective.
    pub fn check_objective(&self, objective: &dyn Objective) -> Result<(), McmcError> {
        if self.state.objective != objective.descriptor() {
            return Err(McmcError::CheckpointMismatch(
                "objective differs from the checkpoint".into(),
            ));
        }
        Ok(())
    }

    /// Rewrites `path` atomically after every iteration.
    pub fn with_checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint = Some(path.into());
        self
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.t >= self.state.config.n_iter
    }

    /// Runs one iteration.
    pub fn step(&mut self, objective: &mut dyn Objective) -> Result<&HistoryEntry, McmcError> {
        let t = self.state.t + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(iteration_seed(self.state.config.seed, t));
        let proposal = self.proposer.propose(&self.state.theta_current.values, &mut rng);
        let params = ResampleParams {
            values: proposal.values.clone(),
            ..self.state.theta_current.clone()
        };

        let (ap, accepted, failure) = match objective.evaluate(t, &params) {
            Ok(ap) => {
                if !ap.is_valid() || ap.ranges.len() != params.values.len() {
                    return Err(McmcError::InvalidApVector { t, ap });
                }
                let ok = accept(&ap, &self.state.p_current, self.state.config.acceptance, &mut rng);
                (ap, ok, None)
            }
            Err(e) if e.is_fatal() => {
                return Err(McmcError::ObjectiveFailure {
                    t,
                    message: e.to_string(),
                })
            }
            Err(e) => {
                log::warn!("iteration {t}: {e}; proposal rejected");
                (ApVector::zeros(params.values.len()), false, Some(e.to_string()))
            }
        };

        if ap.overall > self.state.p_best.overall {
            self.state.p_best = ap.clone();
            self.state.theta_best = params.clone();
        }
        if accepted {
            self.state.theta_current = params;
            self.state.p_current = ap.clone();
            self.state.accept_count += 1;
        }
        self.state.history.push(HistoryEntry {
            t,
            proposal: proposal.values,
            ring: proposal.ring,
            delta: proposal.delta,
            degenerate: proposal.degenerate,
            ap,
            accepted,
            failure,
        });
        self.state.t = t;
        if let Some(path) = &self.checkpoint {
            write_json_atomic(path, &self.state)?;
        }
        Ok(self.state.history.last().expect("just pushed"))
    }

    /// Runs until `n_iter` or `stop_after` total iterations, whichever is first.
    pub fn run(&mut self, objective: &mut dyn Objective, stop_after: Option<usize>) -> Result<(), McmcError> {
        let limit = stop_after.unwrap_or(usize::MAX).min(self.state.config.n_iter);
        while self.state.t < limit {
            let entry = self.step(objective)?;
            log::debug!(
                "t={} ring={} p_o={:.4} accepted={}",
                entry.t,
                entry.ring,
                entry.ap.overall,
                entry.accepted
            );
        }
        Ok(())
    }
}

/// Runs a fresh chain of `config.n_iter` iterations in memory.
pub fn run_chain(
    objective: &mut dyn Objective,
    init: ResampleParams,
    config: ChainConfig,
) -> Result<ChainState, McmcError> {
    let mut chain = Chain::new(init, config, objective)?;
    chain.run(objective, None)?;
    Ok(chain.into_state())
}

/// Write-to-temp then rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), McmcError> {
    let err = |e: std::io::Error| McmcError::Checkpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| McmcError::Checkpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    {
        let mut f = File::create(&tmp).map_err(err)?;
        f.write_all(&bytes).map_err(err)?;
        f.sync_all().map_err(err)?;
    }
    fs::rename(&tmp, path).map_err(err)
}

/// Exclusive ownership of a chain workspace, released on drop.
#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

impl WorkspaceLock {
    pub const FILE_NAME: &'static str = ".rangeforge.lock";

    /// A lock left behind by a process that no longer exists (e.g. a killed
    /// run) is taken over.
    pub fn acquire(workspace: &Path) -> Result<Self, McmcError> {
        let path = workspace.join(Self::FILE_NAME);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if !holder_is_gone(&path) {
                        return Err(McmcError::WorkspaceLocked(path));
                    }
                    log::warn!("removing stale lock {}", path.display());
                    let _ = fs::remove_file(&path);
                }
                Err(e) => {
                    return Err(McmcError::Checkpoint {
                        path,
                        message: e.to_string(),
                    })
                }
            }
        }
        Err(McmcError::WorkspaceLocked(path))
    }
}

/// Only decidable where `/proc` exists; elsewhere a lock is always honoured.
fn holder_is_gone(lock: &Path) -> bool {
    let Ok(text) = fs::read_to_string(lock) else {
        return false;
    };
    let Ok(pid) = text.trim().parse::<u32>() else {
        return false;
    };
    let proc = Path::new("/proc");
    proc.is_dir() && pid != std::process::id() && !proc.join(pid.to_string()).exists()
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
