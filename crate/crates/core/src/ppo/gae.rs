//! Generalized advantage estimation.

use super::{PpoConfig, Transition};
use crate::error::{GrlError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Gae {
    /// Raw (unnormalized) advantages.
    pub advantages: Vec<f64>,
    /// `advantages + values`, the critic's regression targets.
    pub returns: Vec<f64>,
}

/// `bootstrap_value` is the critic's estimate for the state after the last
/// transition; it is ignored when that transition terminated the episode.
pub fn compute_gae(transitions: &[Transition], bootstrap_value: f64, config: &PpoConfig) -> Result<Gae> {
    if transitions.is_empty() {
        return Err(GrlError::Empty("trajectory"));
    }
    let n = transitions.len();
    let mut advantages = vec![0.0; n];
    let mut next_value = bootstrap_value;
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let tr = &transitions[t];
        let live = if tr.done { 0.0 } else { 1.0 };
        let delta = tr.reward + config.discount * next_value * live - tr.value;
        carry = delta + config.discount * config.gae_lambda * live * carry;
        advantages[t] = carry;
        next_value = tr.value;
    }
    let returns = advantages.iter().zip(transitions).map(|(a, tr)| a + tr.value).collect();
    Ok(Gae { advantages, returns })
}

/// Shifts and scales to zero mean and unit variance. A batch with no spread
/// is only centered.
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in advantages.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std + 1e-8;
        }
    }
}
