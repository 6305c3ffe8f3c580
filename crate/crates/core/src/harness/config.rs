use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::optim::{Algorithm, OptimizerConfig};

/// One experiment, read from TOML.
///
/// ```toml
/// algorithms = ["rnpg_direct", "epirc"]
/// repeats = 1
/// output_dir = "runs/crs"
///
/// [env]
/// name = "crs"
///
/// [optimizer]
/// lambda = 50.0
/// iterations = 1000
/// ```
///
/// Every table and key is optional except `algorithms`; unknown keys are
/// rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub repeats: usize,
    /// Repeat `r` runs with seeds `seed + r * seed_stride`.
    pub seed_stride: u64,
    /// Add native-sense columns to the traces.
    pub report_native_sense: bool,
    /// Write measured milliseconds into the per-iteration traces. Off by
    /// default so reruns produce identical files.
    pub record_wall_ms: bool,
    pub output_dir: PathBuf,
    pub env: EnvSpec,
    pub optimizer: OptimizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: Vec::new(),
            repeats: 1,
            seed_stride: 0,
            report_native_sense: true,
            record_wall_ms: false,
            output_dir: PathBuf::from("runs"),
            env: EnvSpec::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms: at least one algorithm is required".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats: must be >= 1".into()));
        }
        self.env.validate()?;
        self.optimizer.validate()
    }

    /// Set both the environment and the optimizer seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.env.seed = seed;
        self.optimizer.seed = seed;
        self.optimizer.robust.seed = seed;
    }

    /// Configuration of repeat `r`.
    pub fn for_repeat(&self, r: usize) -> (EnvSpec, OptimizerConfig) {
        let shift = self.seed_stride.wrapping_mul(r as u64);
        let mut env = self.env.clone();
        env.seed = env.seed.wrapping_add(shift);
        let mut opt = self.optimizer.clone();
        opt.seed = opt.seed.wrapping_add(shift);
        opt.robust.seed = opt.robust.seed.wrapping_add(shift);
        (env, opt)
    }
}
