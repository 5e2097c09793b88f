use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::geometry::RangeSpec;
use crate::mcmc::{AcceptanceRule, ChainConfig, ExternalSpec, DEFAULT_ITERATIONS, DEFAULT_SIGMA};
use crate::metrics::EvalConfig;
use crate::resampling::{DgrOptions, ResampleMethod, ResampleParams, SensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSizes {
    pub n_train: usize,
    pub n_val: usize,
}

impl Default for SubsetSizes {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_val: 250,
        }
    }
}

/// Chain settings. `step` defaults per method (0.05 for RS, 0.025 for DGR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub method: ResampleMethod,
    pub init: Option<Vec<f64>>,
    pub step: Option<f64>,
    pub sigma: f64,
    pub n_iter: usize,
    pub seed: u64,
    /// Seed handed to RS in every proposal.
    pub sampling_seed: u64,
    pub acceptance: AcceptanceRule,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            method: ResampleMethod::Rs,
            init: None,
            step: None,
            sigma: DEFAULT_SIGMA,
            n_iter: DEFAULT_ITERATIONS,
            seed: 0,
            sampling_seed: 0,
            acceptance: AcceptanceRule::Metropolis,
        }
    }
}

impl McmcSettings {
    pub fn chain_config(&self, sensor: &SensorSpec) -> ChainConfig {
        let base = ChainConfig::for_method(self.method, sensor, self.seed);
        ChainConfig {
            n_iter: self.n_iter,
            step: self.step.unwrap_or(base.step),
            sigma: self.sigma,
            acceptance: self.acceptance,
            ..base
        }
    }

    pub fn init_params(&self, rings: usize) -> ResampleParams {
        ResampleParams {
            method: self.method,
            values: self.init.clone().unwrap_or_else(|| vec![1.0; rings]),
            seed: self.sampling_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveConfig {
    /// In-process quadratic bowl around `target`.
    Surrogate {
        target: Vec<f64>,
    },
    External(ExternalSpec),
}

/// One JSON document; every field has a default so `{}` is runnable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ranges: RangeSpec,
    pub sensor: SensorSpec,
    pub dgr: DgrOptions,
    /// Fixed θ for `resample`.
    pub resample: Option<ResampleParams>,
    pub mcmc: McmcSettings,
    pub objective: Option<ObjectiveConfig>,
    pub eval: EvalConfig,
    pub subsets: SubsetSizes,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ranges: RangeSpec::default(),
            sensor: SensorSpec::waymo_like(),
            dgr: DgrOptions::default(),
            resample: None,
            mcmc: McmcSettings::default(),
            objective: None,
            eval: EvalConfig::default(),
            subsets: SubsetSizes::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| IoError::Config {
            path: path.to_path_buf(),
            message: format!("`{}`: {}", e.path(), e.inner()),
        })?;
        config.validate().map_err(|message| IoError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Checks every embedded spec on its own and their consistency.
    pub fn validate(&self) -> Result<(), String> {
        let rings = self.ranges.ring_count();
        self.sensor.validate().map_err(|e| format!("sensor: {e}"))?;
        self.dgr.validate().map_err(|e| format!("dgr: {e}"))?;
        self.eval.validate().map_err(|e| format!("eval: {e}"))?;
        if self.eval.ranges.ring_count() != rings {
            return Err("eval.ranges must have as many rings as ranges".into());
        }
        if let Some(p) = &self.resample {
            p.validate(rings, &self.sensor).map_err(|e| format!("resample: {e}"))?;
        }
        if self.mcmc.method == ResampleMethod::Passthrough {
            return Err("mcmc.method must be rs or dgr".into());
        }
        self.mcmc
            .chain_config(&self.sensor)
            .validate()
            .map_err(|e| format!("mcmc: {e}"))?;
        self.mcmc
            .init_params(rings)
            .validate(rings, &self.sensor)
            .map_err(|e| format!("mcmc.init: {e}"))?;
        match &self.objective {
            Some(ObjectiveConfig::Surrogate { target }) if target.len() != rings => {
                Err(format!("objective.target needs {rings} values"))
            }
            Some(ObjectiveConfig::External(spec)) => spec.validate(),
            _ => Ok(()),
        }
    }
}
