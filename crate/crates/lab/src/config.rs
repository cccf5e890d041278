//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{ComparatorSpec, DelaySpec, EnvironmentSpec, LambdaSpec, MemorySpec};
use crate::error::LabError;

pub const SEED_ENV_VAR: &str = "OCO_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cmd,
    Grid,
    Batched,
    BatchedDoubling,
    Delay,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerParams {
    /// Lipschitz scale. Required by `grid` and `batched`; the starting guess
    /// for `batched_doubling`; for `delay` and `memory` a fixed value
    /// selects the plain batched learner, absence selects doubling.
    #[serde(rename = "L", default)]
    pub lipschitz: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Only for `cmd`; defaults to `1 / (G + lambda_max)`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(rename = "G", default = "default_g")]
    pub g: f64,
    /// Unary gradient bound for `memory`; defaults to `G`.
    #[serde(rename = "H", default)]
    pub h: Option<f64>,
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_g() -> f64 {
    1.0
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            lipschitz: None,
            epsilon: default_epsilon(),
            eta: None,
            g: default_g(),
            h: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

fn default_dim() -> usize {
    1
}

fn default_replicates() -> usize {
    1
}

fn default_lambda() -> LambdaSpec {
    LambdaSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub learner: LearnerParams,
    pub environment: EnvironmentSpec,
    pub comparator: ComparatorSpec,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub delay: Option<DelaySpec>,
    #[serde(default)]
    pub memory: Option<MemorySpec>,
    #[serde(default)]
    pub seed: u64,
    /// Independent repetitions averaged by `sweep`, with seeds
    /// `seed, seed + 1, ...`.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn positive(v: f64, name: &str) -> Result<(), LabError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!(
            "cannot read {}: {e}",
            path.display()
        )))?;
        Self::from_json(&text)
    }

    /// Replaces the seed with `OCO_SEED` when that variable is set.
    pub fn apply_seed_override(&mut self) -> Result<(), LabError> {
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| bad(format!("{SEED_ENV_VAR}={raw:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.horizon == 0 {
            return Err(bad("T must be at least 1"));
        }
        if self.dim == 0 {
            return Err(bad("dim must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(bad("replicates must be at least 1"));
        }
        let p = &self.learner;
        positive(p.epsilon, "epsilon")?;
        positive(p.g, "G")?;
        if let Some(l) = p.lipschitz {
            positive(l, "L")?;
        }
        if let Some(h) = p.h {
            positive(h, "H")?;
        }
        match (self.algorithm, p.eta) {
            (Algorithm::Cmd, Some(eta)) => positive(eta, "eta")?,
            (Algorithm::Cmd, None) => {}
            (_, Some(_)) => return Err(bad("eta only applies to algorithm cmd")),
            _ => {}
        }
        if matches!(self.algorithm, Algorithm::Grid | Algorithm::Batched) && p.lipschitz.is_none() {
            return Err(bad(format!("algorithm {:?} needs L", self.algorithm)));
        }
        let is_delay = self.algorithm == Algorithm::Delay;
        let is_memory = self.algorithm == Algorithm::Memory;
        if is_delay != self.delay.is_some() {
            return Err(bad("a delay schedule is required for, and only for, algorithm delay"));
        }
        if is_memory != self.memory.is_some() {
            return Err(bad("a memory schedule is required for, and only for, algorithm memory"));
        }
        let memory_env = self.environment == EnvironmentSpec::MemoryTracking;
        if is_memory != memory_env {
            return Err(bad("algorithm memory pairs with environment memory_tracking"));
        }
        if is_memory && self.lambda != LambdaSpec::Zero {
            return Err(bad("the memory game has no external movement cost; use lambda zero"));
        }
        if matches!(self.comparator, ComparatorSpec::BestFixed { .. })
            && self.environment != EnvironmentSpec::Linear
        {
            return Err(bad("best_fixed comparator needs the linear environment"));
        }
        if let ComparatorSpec::Fixed { u } = &self.comparator {
            if u.len() != self.dim {
                return Err(bad(format!("fixed comparator has {} entries, dim is {}", u.len(), self.dim)));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Copy at another horizon, without output paths.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            outputs: Outputs::default(),
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}
