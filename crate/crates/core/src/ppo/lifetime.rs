use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    compute_gae, episode_reward, gaussian_log_prob, normalize_advantages, surrogate_gradient, Adam, LossStats,
    PpoConfig, Sample, Transition,
};
use crate::error::{GrlError, Result};
use crate::policy::AgentGenome;
use crate::rng::{seeded, StreamRng};
use crate::terrain::TerrainEnv;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub reward: f64,
    pub forward_distance: f64,
    pub control_cost: f64,
    pub steps: u32,
}

#[derive(Clone, Debug)]
pub struct Lifetime {
    pub genome: AgentGenome,
    pub episodes: Vec<EpisodeRecord>,
}

/// One agent learning on one environment. Optimizer state persists across
/// episodes for the whole lifetime.
pub struct LifetimeTrainer<'a> {
    pub genome: AgentGenome,
    env: &'a mut TerrainEnv,
    config: PpoConfig,
    adam: Adam,
    rng: StreamRng,
    episodes: u32,
}

impl<'a> LifetimeTrainer<'a> {
    pub fn new(genome: AgentGenome, env: &'a mut TerrainEnv, config: PpoConfig, seed: u64) -> Self {
        LifetimeTrainer {
            genome,
            env,
            adam: Adam::new(config.lr),
            config,
            rng: seeded(seed),
            episodes: 0,
        }
    }

    /// Runs one episode with actions sampled from the Gaussian policy.
    /// Returns the record, the transitions, and the bootstrap value of the
    /// final state (zero when the episode terminated).
    pub fn rollout(&mut self) -> Result<(EpisodeRecord, Vec<Transition>, f64)> {
        let mut obs = self.env.reset().to_vec();
        let std: Vec<f64> = self.genome.log_std.iter().map(|l| l.exp()).collect();
        let mut transitions = Vec::with_capacity(self.env.config().t_end as usize);
        let mut control_cost = 0.0;
        loop {
            let mean = self.genome.actor.forward(&obs)?;
            let value = self.genome.critic.forward(&obs)?[0];
            let action: Vec<f64> = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    m + s * z
                })
                .collect();
            let log_prob = gaussian_log_prob(&mean, &self.genome.log_std, &action);
            let out = self.env.step(&action)?;
            control_cost += out.control_cost;
            transitions.push(Transition {
                obs,
                action,
                log_prob,
                reward: out.reward,
                value,
                done: out.finished,
            });
            obs = out.obs.to_vec();
            if out.done {
                let bootstrap = if out.finished {
                    0.0
                } else {
                    self.genome.critic.forward(&obs)?[0]
                };
                let rewards: Vec<f64> = transitions.iter().map(|t| t.reward).collect();
                let record = EpisodeRecord {
                    episode: self.episodes,
                    reward: episode_reward(&rewards),
                    forward_distance: out.state.x,
                    control_cost,
                    steps: out.state.t,
                };
                self.episodes += 1;
                return Ok((record, transitions, bootstrap));
            }
        }
    }

    pub fn update(&mut self, transitions: &[Transition], bootstrap: f64) -> Result<LossStats> {
        ppo_update(
            &mut self.genome,
            &mut self.adam,
            transitions,
            bootstrap,
            &self.config,
            &mut self.rng,
        )
    }

    /// Rollout followed by one update.
    pub fn episode(&mut self) -> Result<EpisodeRecord> {
        let (record, transitions, bootstrap) = self.rollout()?;
        self.update(&transitions, bootstrap)?;
        Ok(record)
    }
}

/// Clipped-surrogate update over one episode's transitions for
/// `config.epochs` passes of shuffled minibatches.
pub fn ppo_update(
    genome: &mut AgentGenome,
    adam: &mut Adam,
    transitions: &[Transition],
    bootstrap: f64,
    config: &PpoConfig,
    rng: &mut StreamRng,
) -> Result<LossStats> {
    let gae = compute_gae(transitions, bootstrap, config)?;
    let mut advantages = gae.advantages;
    normalize_advantages(&mut advantages);
    let samples: Vec<Sample> = transitions
        .iter()
        .zip(advantages)
        .zip(gae.returns)
        .map(|((t, advantage), ret)| Sample {
            obs: t.obs.clone(),
            action: t.action.clone(),
            old_log_prob: t.log_prob,
            advantage,
            ret,
        })
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut last = LossStats::default();
    let mut minibatch = Vec::with_capacity(config.minibatch);
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch) {
            minibatch.clear();
            minibatch.extend(chunk.iter().map(|&i| samples[i].clone()));
            let (stats, grads) = surrogate_gradient(genome, &minibatch, config)?;
            adam.step(genome, &grads);
            last = stats;
        }
    }
    if !genome.is_finite() {
        return Err(GrlError::NonFinite("parameters diverged during update".into()));
    }
    Ok(last)
}

/// Trains for exactly `lifetime` episodes, one update per episode.
pub fn train_lifetime(
    genome: AgentGenome,
    env: &mut TerrainEnv,
    lifetime: u32,
    config: &PpoConfig,
    seed: u64,
) -> Result<Lifetime> {
    if lifetime == 0 {
        return Err(GrlError::InvalidArgument(
            "lifetime must be at least one episode".into(),
        ));
    }
    let mut trainer = LifetimeTrainer::new(genome, env, *config, seed);
    let episodes = (0..lifetime).map(|_| trainer.episode()).collect::<Result<Vec<_>>>()?;
    Ok(Lifetime {
        genome: trainer.genome,
        episodes,
    })
}

/// Runs the mean-action policy without learning.
pub fn evaluate_policy(genome: &AgentGenome, env: &mut TerrainEnv, episodes: u32) -> Result<Vec<EpisodeRecord>> {
    (0..episodes)
        .map(|e| {
            let mut obs = env.reset();
            let mut reward = 0.0;
            let mut control_cost = 0.0;
            loop {
                let mean = genome.actor.forward(&obs)?;
                let out = env.step(&mean)?;
                reward += out.reward;
                control_cost += out.control_cost;
                obs = out.obs;
                if out.done {
                    return Ok(EpisodeRecord {
                        episode: e,
                        reward,
                        forward_distance: out.state.x,
                        control_cost,
                        steps: out.state.t,
                    });
                }
            }
        })
        .collect()
}
