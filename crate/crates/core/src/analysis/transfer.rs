use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};
use crate::harness::RunConfig;
use crate::policy::AgentGenome;
use crate::ppo::{evaluate_policy, train_lifetime};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::terrain::{generate_heightfield, ObstacleKind, TerrainEnv};

/// How much training on obstacle j helps on obstacle i, relative to the
/// agent trained on i itself (1) and to a half-trained agent on i (0).
pub fn knowledge_transfer_rate(r_ji: f64, r_ii: f64, w_i: f64) -> Result<f64> {
    let denom = r_ii - w_i;
    if denom == 0.0 || !denom.is_finite() {
        return Err(GrlError::InvalidArgument(format!(
            "transfer rate undefined: R_ii = w_i = {w_i}"
        )));
    }
    Ok((r_ji - w_i) / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSettings {
    /// Training episodes per agent.
    pub episodes: u32,
    /// Independently trained agents per obstacle.
    pub seeds: u64,
    /// Obstacle instances each trained agent is evaluated on.
    pub eval_instances: u64,
    pub master_seed: u64,
}

impl Default for TransferSettings {
    fn default() -> Self {
        TransferSettings {
            episodes: 40,
            seeds: 3,
            eval_instances: 5,
            master_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub tasks: Vec<ObstacleKind>,
    /// `returns[j][i]`: mean evaluation reward on obstacle i of agents trained on j.
    pub returns: Vec<Vec<f64>>,
    /// Mean reward on obstacle i at the midpoint of training on i.
    pub midpoint: Vec<f64>,
    /// `rates[j][i]`; `None` where the rate is undefined.
    pub rates: Vec<Vec<Option<f64>>>,
}

impl TransferMatrix {
    pub fn rate(&self, trained_on: ObstacleKind, evaluated_on: ObstacleKind) -> Option<f64> {
        let j = self.tasks.iter().position(|&t| t == trained_on)?;
        let i = self.tasks.iter().position(|&t| t == evaluated_on)?;
        self.rates[j][i]
    }
}

struct TrainedAgent {
    task: usize,
    midpoint: f64,
    returns: Vec<f64>,
}

/// Trains scratch agents on every obstacle and evaluates each, without
/// further training, on fresh instances of every obstacle.
pub fn transfer_matrix(config: &RunConfig, settings: &TransferSettings) -> Result<TransferMatrix> {
    if settings.episodes < 2 || settings.seeds == 0 || settings.eval_instances == 0 {
        return Err(GrlError::Config(
            "transfer matrix needs at least 2 episodes, 1 seed and 1 evaluation instance".into(),
        ));
    }
    let tasks = ObstacleKind::ALL.to_vec();
    let actor = config.actor_architecture();
    let critic = config.critic_architecture();
    let m = settings.master_seed;
    let jobs: Vec<(usize, u64)> = (0..tasks.len())
        .flat_map(|j| (0..settings.seeds).map(move |s| (j, s)))
        .collect();
    let agents: Vec<TrainedAgent> = jobs
        .par_iter()
        .map(|&(j, s)| {
            let genome = AgentGenome::random(
                &actor,
                &critic,
                config.evolution.init_method,
                &mut stream_rng(m, j as u64, s, Stream::Baseline),
            );
            let track = generate_heightfield(
                tasks[j],
                derive_seed(m, j as u64, s, Stream::Terrain),
                config.env.terrain_scale,
            )?;
            let mut env = TerrainEnv::new(Arc::new(track), config.env);
            let life = train_lifetime(
                genome,
                &mut env,
                settings.episodes,
                &config.ppo,
                derive_seed(m, j as u64, s, Stream::Train),
            )?;
            let midpoint = life.episodes[settings.episodes as usize / 2].reward;
            let returns = tasks
                .iter()
                .enumerate()
                .map(|(i, &kind)| {
                    let mut total = 0.0;
                    for k in 0..settings.eval_instances {
                        let seed = derive_seed(m, 1000 + i as u64, s * settings.eval_instances + k, Stream::Terrain);
                        let track = generate_heightfield(kind, seed, config.env.terrain_scale)?;
                        let mut env = TerrainEnv::new(Arc::new(track), config.env);
                        total += evaluate_policy(&life.genome, &mut env, 1)?[0].reward;
                    }
                    Ok(total / settings.eval_instances as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainedAgent {
                task: j,
                midpoint,
                returns,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = tasks.len();
    let mut returns = vec![vec![0.0; n]; n];
    let mut midpoint = vec![0.0; n];
    let per = settings.seeds as f64;
    for a in &agents {
        midpoint[a.task] += a.midpoint / per;
        for (i, r) in a.returns.iter().enumerate() {
            returns[a.task][i] += r / per;
        }
    }
    let rates = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| knowledge_transfer_rate(returns[j][i], returns[i][i], midpoint[i]).ok())
                .collect()
        })
        .collect();
    Ok(TransferMatrix {
        tasks,
        returns,
        midpoint,
        rates,
    })
}
