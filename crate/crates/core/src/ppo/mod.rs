//! Lifetime reinforcement learning: clipped-surrogate policy gradient on a
//! Gaussian actor with a learned global log-std, plus a value critic.

mod gae;
mod lifetime;
mod loss;
mod optim;

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};

pub use gae::{compute_gae, normalize_advantages, Gae};
pub use lifetime::{evaluate_policy, ppo_update, train_lifetime, EpisodeRecord, Lifetime, LifetimeTrainer};
pub use loss::{gaussian_log_prob, surrogate_gradient, surrogate_loss, LossStats, Sample};
pub use optim::Adam;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            discount: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch: 64,
            lr: 3e-4,
            entropy_coef: 0.0,
            value_coef: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(GrlError::Config(m));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return err(format!("discount must be in (0, 1), got {}", self.discount));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return err(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if self.clip_eps.is_nan() || self.clip_eps <= 0.0 {
            return err(format!("clip_eps must be positive, got {}", self.clip_eps));
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return err("epochs and minibatch must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return err(format!("lr must be non-negative, got {}", self.lr));
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return err("loss coefficients must be non-negative".into());
        }
        Ok(())
    }
}

/// Per-step reward: weighted forward velocity minus a penalty on the squared
/// action norm.
pub fn step_reward(velocity: f64, action: &[f64], velocity_weight: f64, control_weight: f64) -> f64 {
    let norm_sq: f64 = action.iter().map(|a| a * a).sum();
    velocity_weight * velocity - control_weight * norm_sq
}

/// Episode reward: the plain sum of step rewards.
pub fn episode_reward(step_rewards: &[f64]) -> f64 {
    step_rewards.iter().sum()
}

/// One environment interaction as stored for the update.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// True only when the episode terminated (not when it was truncated).
    pub done: bool,
}
