use std::sync::Arc;

use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::evolution::Newborn;
use crate::policy::LearngeneForm;
use crate::ppo::{train_lifetime, EpisodeRecord, Lifetime, PpoConfig};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::terrain::{generate_heightfield, EnvConfig, TerrainEnv};

/// Whatever turns a newborn into a trained agent with a reward history.
pub trait LifetimeLearner: Sync {
    fn live(&self, newborn: &Newborn, generation: u32) -> Result<Lifetime>;
}

/// Reinforcement learning with PPO on a freshly generated instance of the
/// newborn's assigned obstacle.
#[derive(Clone, Debug)]
pub struct PpoLearner {
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub lifetime: u32,
    pub master_seed: u64,
}

impl PpoLearner {
    pub fn from_config(config: &super::RunConfig) -> Self {
        PpoLearner {
            ppo: config.ppo,
            env: config.env,
            lifetime: config.evolution.lifetime,
            master_seed: config.evolution.master_seed,
        }
    }
}

impl LifetimeLearner for PpoLearner {
    fn live(&self, newborn: &Newborn, generation: u32) -> Result<Lifetime> {
        let (g, a) = (generation as u64, newborn.agent_id as u64);
        let terrain_seed = derive_seed(self.master_seed, g, a, Stream::Terrain);
        let track = generate_heightfield(newborn.task, terrain_seed, self.env.terrain_scale)?;
        let mut env = TerrainEnv::new(Arc::new(track), self.env);
        let train_seed = derive_seed(self.master_seed, g, a, Stream::Train);
        train_lifetime(newborn.genome.clone(), &mut env, self.lifetime, &self.ppo, train_seed)
    }
}

/// Synthetic stand-in for learning: parameters are left untouched and each
/// episode's reward is `bonus` for carriers of the favored form (zero
/// otherwise) plus Gaussian noise.
#[derive(Clone, Debug)]
pub struct FormOracle {
    pub favored: LearngeneForm,
    pub bonus: f64,
    pub noise: f64,
    pub lifetime: u32,
    pub master_seed: u64,
}

impl LifetimeLearner for FormOracle {
    fn live(&self, newborn: &Newborn, generation: u32) -> Result<Lifetime> {
        let mut rng = stream_rng(
            self.master_seed,
            generation as u64,
            newborn.agent_id as u64,
            Stream::Oracle,
        );
        let base = if newborn.inherited.as_ref() == Some(&self.favored) {
            self.bonus
        } else {
            0.0
        };
        let noise = Normal::new(0.0, self.noise.max(0.0)).expect("non-negative std");
        let episodes = (0..self.lifetime)
            .map(|episode| EpisodeRecord {
                episode,
                reward: base + noise.sample(&mut rng),
                forward_distance: 0.0,
                control_cost: 0.0,
                steps: 0,
            })
            .collect();
        Ok(Lifetime {
            genome: newborn.genome.clone(),
            episodes,
        })
    }
}
