use crate::policy::AgentGenome;

/// Adam over every parameter of a genome, in a fixed traversal order.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

fn params_mut(genome: &mut AgentGenome) -> impl Iterator<Item = &mut f64> {
    genome
        .actor
        .layers
        .iter_mut()
        .chain(genome.critic.layers.iter_mut())
        .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
        .chain(genome.log_std.iter_mut())
}

fn params(genome: &AgentGenome) -> impl Iterator<Item = &f64> {
    genome
        .actor
        .layers
        .iter()
        .chain(genome.critic.layers.iter())
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
        .chain(genome.log_std.iter())
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, genome: &mut AgentGenome, grads: &AgentGenome) {
        if self.m.is_empty() {
            let n = params(grads).count();
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params_mut(genome)
            .zip(params(grads))
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{InitMethod, NetworkArchitecture};
    use crate::rng::seeded;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let a = NetworkArchitecture::new(2, 3, 1).unwrap();
        let c = NetworkArchitecture::new(2, 3, 1).unwrap();
        let mut g = AgentGenome::random(&a, &c, InitMethod::Orthogonal, &mut seeded(1));
        let before = g.clone();
        let mut grads = AgentGenome::zeros(&a, &c);
        grads.log_std = vec![0.0];
        grads.actor.layers[0].weights[0] = 3.0;
        grads.critic.layers[5].bias[0] = -0.5;
        let mut adam = Adam::new(0.01);
        adam.step(&mut g, &grads);
        assert!((g.actor.layers[0].weights[0] - (before.actor.layers[0].weights[0] - 0.01)).abs() < 1e-9);
        assert!((g.critic.layers[5].bias[0] - (before.critic.layers[5].bias[0] + 0.01)).abs() < 1e-9);
        assert_eq!(g.actor.layers[1], before.actor.layers[1]);
    }
}
