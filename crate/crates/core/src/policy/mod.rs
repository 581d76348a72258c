//! Fixed-depth tanh MLPs holding agent parameters.
//!
//! Every network has exactly [`NUM_LAYERS`] dense layers: input to the first
//! hidden layer, four hidden-to-hidden layers, and a linear output layer.
//! Learngenes address these layers by index.

mod init;
mod learngene;

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};

pub use init::InitMethod;
pub use learngene::{
    effective_layer_width, extract_learngene, manhattan_change, transplant_learngene, LearngeneForm, LearngenePayload,
    NetworkTag,
};

pub const NUM_LAYERS: usize = 6;
pub const HIDDEN_LAYERS: usize = NUM_LAYERS - 1;

/// Initial value of every entry of the policy's log standard deviation.
pub const INITIAL_LOG_STD: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl NetworkArchitecture {
    pub fn new(input_dim: usize, hidden_width: usize, output_dim: usize) -> Result<Self> {
        let arch = NetworkArchitecture {
            input_dim,
            hidden_width,
            output_dim,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_width == 0 || self.output_dim == 0 {
            return Err(GrlError::Config(format!(
                "network dimensions must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each of the six layers.
    pub fn layer_shapes(&self) -> [(usize, usize); NUM_LAYERS] {
        let h = self.hidden_width;
        let mut shapes = [(h, h); NUM_LAYERS];
        shapes[0].0 = self.input_dim;
        shapes[NUM_LAYERS - 1].1 = self.output_dim;
        shapes
    }

    /// Trainable parameters (weights and biases) of layer `index`.
    pub fn layer_param_count(&self, index: usize) -> usize {
        let (fan_in, fan_out) = self.layer_shapes()[index];
        fan_in * fan_out + fan_out
    }

    pub fn layer_effective_width(&self, index: usize) -> f64 {
        (self.layer_param_count(index) as f64).sqrt()
    }
}

/// Realizes the six-layer structure for `arch`, rejecting zero dimensions.
pub fn build_network(arch: &NetworkArchitecture) -> Result<[(usize, usize); NUM_LAYERS]> {
    arch.validate()?;
    Ok(arch.layer_shapes())
}

/// One dense layer. `weights` is row-major with one row per output unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        LayerParams {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.fan_in, self.fan_out)
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.fan_in + inp]
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.fan_in..(o + 1) * self.fan_in];
            b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        }));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub layers: Vec<LayerParams>,
}

/// Layer inputs recorded during a forward pass, for backpropagation.
///
/// `activations[k]` is the input of layer `k`; the last entry is the network
/// output.
#[derive(Clone, Debug, Default)]
pub struct ForwardTrace {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl ParameterSet {
    pub fn zeros(arch: &NetworkArchitecture) -> Self {
        ParameterSet {
            layers: arch
                .layer_shapes()
                .iter()
                .map(|&(i, o)| LayerParams::zeros(i, o))
                .collect(),
        }
    }

    pub fn init<R: rand::Rng + ?Sized>(arch: &NetworkArchitecture, method: InitMethod, rng: &mut R) -> Self {
        ParameterSet {
            layers: arch
                .layer_shapes()
                .iter()
                .map(|&(i, o)| method.layer(i, o, rng))
                .collect(),
        }
    }

    pub fn architecture(&self) -> NetworkArchitecture {
        NetworkArchitecture {
            input_dim: self.layers[0].fan_in,
            hidden_width: self.layers[0].fan_out,
            output_dim: self.layers[NUM_LAYERS - 1].fan_out,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.values().all(|v| v.is_finite()))
    }

    /// Tanh hidden layers followed by a linear output layer.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_input(obs)?;
        let mut x = obs.to_vec();
        let mut next = Vec::with_capacity(self.layers[0].fan_out);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.affine(&x, &mut next);
            if k != last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut x, &mut next);
        }
        Ok(x)
    }

    pub fn forward_trace(&self, obs: &[f64]) -> Result<ForwardTrace> {
        self.check_input(obs)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(obs.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.fan_out);
            layer.affine(&activations[k], &mut out);
            if k != last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        Ok(ForwardTrace { activations })
    }

    /// Accumulates `d(loss)/d(params)` into `grads` given `d(loss)/d(output)`.
    pub fn backward(&self, trace: &ForwardTrace, d_output: &[f64], grads: &mut ParameterSet) {
        let last = self.layers.len() - 1;
        let mut delta = d_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if k != last {
                // activations[k + 1] holds tanh(z) for hidden layers
                for (d, a) in delta.iter_mut().zip(&trace.activations[k + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &trace.activations[k];
            let g = &mut grads.layers[k];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.fan_in];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                delta = prev;
            }
        }
    }

    fn check_input(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.input_dim() {
            return Err(GrlError::Shape(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.input_dim()
            )));
        }
        if obs.iter().any(|v| v.is_nan()) {
            return Err(GrlError::NonFinite("NaN in network input".into()));
        }
        Ok(())
    }
}

/// Actor and critic parameters of one agent plus the policy's global log-std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentGenome {
    pub actor: ParameterSet,
    pub critic: ParameterSet,
    pub log_std: Vec<f64>,
}

impl AgentGenome {
    pub fn zeros(actor: &NetworkArchitecture, critic: &NetworkArchitecture) -> Self {
        AgentGenome {
            actor: ParameterSet::zeros(actor),
            critic: ParameterSet::zeros(critic),
            log_std: vec![INITIAL_LOG_STD; actor.output_dim],
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(
        actor: &NetworkArchitecture,
        critic: &NetworkArchitecture,
        method: InitMethod,
        rng: &mut R,
    ) -> Self {
        let actor_params = ParameterSet::init(actor, method, rng);
        let critic_params = ParameterSet::init(critic, method, rng);
        AgentGenome {
            actor: actor_params,
            critic: critic_params,
            log_std: vec![INITIAL_LOG_STD; actor.output_dim],
        }
    }

    pub fn network(&self, tag: NetworkTag) -> &ParameterSet {
        match tag {
            NetworkTag::Actor => &self.actor,
            NetworkTag::Critic => &self.critic,
        }
    }

    pub fn network_mut(&mut self, tag: NetworkTag) -> &mut ParameterSet {
        match tag {
            NetworkTag::Actor => &mut self.actor,
            NetworkTag::Critic => &mut self.critic,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}
