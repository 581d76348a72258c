use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GrlError, Result};
use crate::evolution::EvolutionConfig;
use crate::policy::NetworkArchitecture;
use crate::ppo::PpoConfig;
use crate::terrain::{EnvConfig, ACTION_DIM, OBS_DIM};

/// Execution settings that do not influence results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub output_dir: Option<PathBuf>,
    /// Generations between checkpoints; the final generation is always saved.
    pub checkpoint_every: u32,
    /// Lifetime-training threads. 0 uses all cores.
    pub workers: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            output_dir: None,
            checkpoint_every: 1,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub evolution: EvolutionConfig,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub hidden_width: usize,
    pub run: RunSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Small profile that runs on a laptop in minutes.
    pub fn desk() -> Self {
        RunConfig {
            evolution: EvolutionConfig::default(),
            ppo: PpoConfig::default(),
            env: EnvConfig::default(),
            hidden_width: 16,
            run: RunSettings::default(),
        }
    }

    /// Population and network sizes of the original large-scale experiments.
    pub fn full() -> Self {
        RunConfig {
            evolution: EvolutionConfig {
                population: 50,
                lifetime: 50,
                generations: 100,
                ..EvolutionConfig::default()
            },
            env: EnvConfig {
                t_end: 3000,
                ..EnvConfig::default()
            },
            hidden_width: 48,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(GrlError::Config(format!(
                "unknown profile {other:?} (expected desk or full)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.evolution.validate()?;
        self.ppo.validate()?;
        self.env.validate()?;
        if self.hidden_width == 0 {
            return Err(GrlError::Config("hidden_width must be positive".into()));
        }
        if self.run.checkpoint_every == 0 {
            return Err(GrlError::Config("checkpoint_every must be positive".into()));
        }
        Ok(())
    }

    pub fn actor_architecture(&self) -> NetworkArchitecture {
        NetworkArchitecture {
            input_dim: OBS_DIM,
            hidden_width: self.hidden_width,
            output_dim: ACTION_DIM,
        }
    }

    pub fn critic_architecture(&self) -> NetworkArchitecture {
        NetworkArchitecture {
            input_dim: OBS_DIM,
            hidden_width: self.hidden_width,
            output_dim: 1,
        }
    }

    /// Architecture of the network learngenes are taken from.
    pub fn gene_architecture(&self) -> NetworkArchitecture {
        crate::evolution::network_architecture(
            self.evolution.network,
            &self.actor_architecture(),
            &self.critic_architecture(),
        )
    }

    /// Hex sha256 over every setting that can change results. Run settings
    /// (output directory, worker count, checkpoint cadence) are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run = RunSettings::default();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| GrlError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| GrlError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GrlError::io(path, e))?;
        Self::from_toml(&text)
    }
}
