//! Clipped surrogate loss and its analytic gradient.

use crate::error::{GrlError, Result};
use crate::policy::{AgentGenome, ParameterSet};

use super::PpoConfig;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A transition prepared for the update: advantage already normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
}

fn zeros_like(genome: &AgentGenome) -> AgentGenome {
    let zero = |p: &ParameterSet| ParameterSet::zeros(&p.architecture());
    AgentGenome {
        actor: zero(&genome.actor),
        critic: zero(&genome.critic),
        log_std: vec![0.0; genome.log_std.len()],
    }
}

/// Mean minibatch loss: `-min(r A, clip(r) A) + c_v (V - R)^2 - c_e H`.
pub fn surrogate_loss(genome: &AgentGenome, batch: &[Sample], config: &PpoConfig) -> Result<LossStats> {
    evaluate(genome, batch, config, None)
}

/// Loss and its gradient with respect to every parameter of the genome
/// (returned in a genome-shaped container).
pub fn surrogate_gradient(
    genome: &AgentGenome,
    batch: &[Sample],
    config: &PpoConfig,
) -> Result<(LossStats, AgentGenome)> {
    let mut grads = zeros_like(genome);
    let stats = evaluate(genome, batch, config, Some(&mut grads))?;
    Ok((stats, grads))
}

fn evaluate(
    genome: &AgentGenome,
    batch: &[Sample],
    config: &PpoConfig,
    mut grads: Option<&mut AgentGenome>,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(GrlError::Empty("minibatch"));
    }
    let n = batch.len() as f64;
    let log_std = &genome.log_std;
    let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
    let mut stats = LossStats::default();
    for s in batch {
        let actor_trace = genome.actor.forward_trace(&s.obs)?;
        let mean = actor_trace.output();
        let logp = gaussian_log_prob(mean, log_std, &s.action);
        let log_ratio = logp - s.old_log_prob;
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - config.clip_eps, 1.0 + config.clip_eps);
        let unclipped_obj = ratio * s.advantage;
        let clipped_obj = clipped * s.advantage;
        stats.policy -= unclipped_obj.min(clipped_obj) / n;
        // the unclipped branch is active unless the ratio has left the trust
        // region in the direction the advantage favors
        let active = !((s.advantage >= 0.0 && ratio > 1.0 + config.clip_eps)
            || (s.advantage < 0.0 && ratio < 1.0 - config.clip_eps));
        if !active {
            stats.clip_fraction += 1.0 / n;
        }
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / n;

        let critic_trace = genome.critic.forward_trace(&s.obs)?;
        let value = critic_trace.output()[0];
        let err = value - s.ret;
        stats.value += err * err / n;

        if let Some(g) = grads.as_deref_mut() {
            // d(policy term)/d(log pi) = -A r / n when the unclipped branch is active
            let coeff = if active { -s.advantage * ratio / n } else { 0.0 };
            if coeff != 0.0 {
                let d_mean: Vec<f64> = mean
                    .iter()
                    .zip(&s.action)
                    .zip(&inv_var)
                    .map(|((m, a), iv)| coeff * (a - m) * iv)
                    .collect();
                genome.actor.backward(&actor_trace, &d_mean, &mut g.actor);
                for ((gl, (m, a)), iv) in g.log_std.iter_mut().zip(mean.iter().zip(&s.action)).zip(&inv_var) {
                    *gl += coeff * ((a - m) * (a - m) * iv - 1.0);
                }
            }
            let d_value = [2.0 * config.value_coef * err / n];
            genome.critic.backward(&critic_trace, &d_value, &mut g.critic);
        }
    }
    stats.entropy = entropy(log_std);
    if let Some(g) = grads {
        for gl in &mut g.log_std {
            *gl -= config.entropy_coef;
        }
    }
    stats.total = stats.policy + config.value_coef * stats.value - config.entropy_coef * stats.entropy;
    if !stats.total.is_finite() {
        return Err(GrlError::NonFinite(format!("surrogate loss {}", stats.total)));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{InitMethod, NetworkArchitecture, NUM_LAYERS};
    use crate::rng::seeded;
    use rand::Rng;

    fn genome(seed: u64) -> AgentGenome {
        let a = NetworkArchitecture::new(3, 4, 2).unwrap();
        let c = NetworkArchitecture::new(3, 4, 1).unwrap();
        let mut g = AgentGenome::random(&a, &c, InitMethod::XavierNormal, &mut seeded(seed));
        g.log_std = vec![-0.3, 0.2];
        g
    }

    fn batch(genome: &AgentGenome, seed: u64, n: usize) -> Vec<Sample> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| {
                let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mean = genome.actor.forward(&obs).unwrap();
                let action: Vec<f64> = mean.iter().map(|m| m + rng.random_range(-1.0..1.0)).collect();
                Sample {
                    old_log_prob: gaussian_log_prob(&mean, &genome.log_std, &action),
                    obs,
                    action,
                    advantage: rng.random_range(-2.0..2.0),
                    ret: rng.random_range(-1.0..1.0),
                }
            })
            .collect()
    }

    #[test]
    fn log_prob_matches_closed_form() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn ratio_one_gives_vanilla_policy_gradient() {
        let g = genome(1);
        let b = batch(&g, 2, 16);
        let cfg = PpoConfig {
            clip_eps: 1e12,
            value_coef: 0.0,
            ..Default::default()
        };
        let (_, grads) = surrogate_gradient(&g, &b, &cfg).unwrap();
        // vanilla: -mean(A * grad log pi), accumulated independently
        let mut vanilla = zeros_like(&g);
        for s in &b {
            let trace = g.actor.forward_trace(&s.obs).unwrap();
            let mean = trace.output();
            let d: Vec<f64> = mean
                .iter()
                .zip(&s.action)
                .zip(&g.log_std)
                .map(|((m, a), ls)| -s.advantage * (a - m) / (2.0 * ls).exp() / b.len() as f64)
                .collect();
            g.actor.backward(&trace, &d, &mut vanilla.actor);
        }
        for k in 0..NUM_LAYERS {
            for (x, y) in grads.actor.layers[k].values().zip(vanilla.actor.layers[k].values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_differences_agree() {
        let mut g = genome(3);
        let b = batch(&g, 4, 12);
        // move away from ratio 1 so both clip branches appear
        g.actor.layers[5].bias[0] += 0.05;
        g.log_std[1] += 0.03;
        let cfg = PpoConfig {
            entropy_coef: 0.01,
            ..Default::default()
        };
        let (_, grads) = surrogate_gradient(&g, &b, &cfg).unwrap();
        let loss = |g: &AgentGenome| surrogate_loss(g, &b, &cfg).unwrap().total;
        let h = 1e-6;
        let check = |analytic: f64, plus: AgentGenome, minus: AgentGenome| {
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (analytic - fd).abs() <= 1e-6 * analytic.abs().max(1e-3),
                "{analytic} vs {fd}"
            );
        };
        for k in 0..NUM_LAYERS {
            for i in 0..g.critic.layers[k].weights.len() {
                let mut p = g.clone();
                p.critic.layers[k].weights[i] += h;
                let mut m = g.clone();
                m.critic.layers[k].weights[i] -= h;
                check(grads.critic.layers[k].weights[i], p, m);
            }
            for i in 0..g.actor.layers[k].bias.len() {
                let mut p = g.clone();
                p.actor.layers[k].bias[i] += h;
                let mut m = g.clone();
                m.actor.layers[k].bias[i] -= h;
                check(grads.actor.layers[k].bias[i], p, m);
            }
        }
        for i in 0..2 {
            let mut p = g.clone();
            p.log_std[i] += h;
            let mut m = g.clone();
            m.log_std[i] -= h;
            check(grads.log_std[i], p, m);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(surrogate_loss(&genome(1), &[], &PpoConfig::default()).is_err());
    }
}
