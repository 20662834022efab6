use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::error::{Error, Result};
use crate::gridworld::{load_env, EnvDescription, GridworldEnv, CANONICAL_LAYOUT};
use crate::ot::OtSolverConfig;
use crate::policy::StationaryConfig;
use crate::risk::RiskSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub wasserstein_p: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            seeds: vec![0, 1, 2, 3, 4],
            wasserstein_p: 1.0,
        }
    }
}

/// Full experiment description; every section is optional in the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvDescription,
    pub risk: RiskSpec,
    pub agent: AgentConfig,
    pub ot: OtSolverConfig,
    pub stationary: StationaryConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: serde_json::from_str(CANONICAL_LAYOUT).expect("shipped layout parses"),
            risk: RiskSpec::default(),
            agent: AgentConfig::default(),
            ot: OtSolverConfig::default(),
            stationary: StationaryConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        load_env(&self.env)?;
        self.risk.validate()?;
        self.agent.validate()?;
        self.ot.validate()?;
        self.stationary.validate()?;
        if self.train.seeds.is_empty() {
            return Err(Error::InvalidConfig("train.seeds must not be empty".into()));
        }
        if self.train.episodes == 0 {
            return Err(Error::InvalidConfig(
                "train.episodes must be at least 1".into(),
            ));
        }
        if !(self.train.wasserstein_p >= 1.0) || !self.train.wasserstein_p.is_finite() {
            return Err(Error::InvalidExponent(self.train.wasserstein_p));
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<GridworldEnv> {
        load_env(&self.env)
    }
}
