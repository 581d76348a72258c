use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AgentGenome, LayerParams, NetworkArchitecture, NUM_LAYERS};
use crate::error::{GrlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkTag {
    Actor,
    Critic,
}

impl NetworkTag {
    fn prefix(self) -> char {
        match self {
            NetworkTag::Actor => 'a',
            NetworkTag::Critic => 'c',
        }
    }
}

impl FromStr for NetworkTag {
    type Err = GrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "actor" => Ok(NetworkTag::Actor),
            "c" | "critic" => Ok(NetworkTag::Critic),
            _ => Err(GrlError::InvalidArgument(format!("unknown network `{s}`"))),
        }
    }
}

/// Which network and which of its layers make up a learngene.
///
/// Written compactly as the network prefix followed by the layer digits,
/// e.g. `a45` for actor layers 4 and 5.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LearngeneForm {
    network: NetworkTag,
    layers: Vec<usize>,
}

impl LearngeneForm {
    pub fn new(network: NetworkTag, layers: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut layers: Vec<usize> = layers.into_iter().collect();
        layers.sort_unstable();
        layers.dedup();
        if let Some(&index) = layers.iter().find(|&&i| i >= NUM_LAYERS) {
            return Err(GrlError::LayerIndex {
                index,
                layers: NUM_LAYERS,
            });
        }
        if layers.is_empty() || layers.len() >= NUM_LAYERS {
            return Err(GrlError::InvalidArgument(format!(
                "a learngene spans 1 to {} layers, got {}",
                NUM_LAYERS - 1,
                layers.len()
            )));
        }
        Ok(LearngeneForm { network, layers })
    }

    /// All `C(6, n_l)` layer combinations of one network, in lexicographic order.
    pub fn all(network: NetworkTag, n_l: usize) -> Result<Vec<LearngeneForm>> {
        if n_l == 0 || n_l >= NUM_LAYERS {
            return Err(GrlError::Config(format!("n_l must be in [1, 5], got {n_l}")));
        }
        Ok((0..NUM_LAYERS)
            .combinations(n_l)
            .map(|layers| LearngeneForm { network, layers })
            .collect())
    }

    pub fn network(&self) -> NetworkTag {
        self.network
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn contains(&self, layer: usize) -> bool {
        self.layers.binary_search(&layer).is_ok()
    }

    /// Sum of effective layer widths over this form's layers.
    pub fn effective_width(&self, arch: &NetworkArchitecture) -> f64 {
        self.layers.iter().map(|&i| arch.layer_effective_width(i)).sum()
    }
}

impl fmt::Display for LearngeneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.network.prefix())?;
        for l in &self.layers {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for LearngeneForm {
    type Err = GrlError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || GrlError::InvalidArgument(format!("malformed learngene form `{s}`"));
        let mut chars = s.chars();
        let network = chars.next().ok_or_else(bad)?.to_string().parse()?;
        let layers = chars
            .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(bad))
            .collect::<Result<Vec<_>>>()?;
        LearngeneForm::new(network, layers)
    }
}

impl Serialize for LearngeneForm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LearngeneForm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Copied parameters of the layers named by `form`, in layer order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearngenePayload {
    pub form: LearngeneForm,
    pub layers: Vec<LayerParams>,
}

impl LearngenePayload {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(LayerParams::values)
    }
}

pub fn extract_learngene(genome: &AgentGenome, form: &LearngeneForm) -> Result<LearngenePayload> {
    let net = genome.network(form.network);
    let layers = form
        .layers
        .iter()
        .map(|&i| {
            net.layers.get(i).cloned().ok_or(GrlError::LayerIndex {
                index: i,
                layers: net.layers.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LearngenePayload {
        form: form.clone(),
        layers,
    })
}

/// Overwrites the payload's layers in `genome`; every other parameter is left alone.
pub fn transplant_learngene(payload: &LearngenePayload, genome: &mut AgentGenome) -> Result<()> {
    let net = genome.network_mut(payload.form.network);
    if payload.layers.len() != payload.form.layers.len() {
        return Err(GrlError::Shape(format!(
            "payload for {} carries {} layers",
            payload.form,
            payload.layers.len()
        )));
    }
    // validate everything before touching the genome
    for (&i, layer) in payload.form.layers.iter().zip(&payload.layers) {
        let target = net.layers.get(i).ok_or(GrlError::LayerIndex {
            index: i,
            layers: net.layers.len(),
        })?;
        if target.shape() != layer.shape()
            || layer.weights.len() != layer.fan_in * layer.fan_out
            || layer.bias.len() != layer.fan_out
        {
            return Err(GrlError::Shape(format!(
                "layer {i}: payload {:?} does not fit network {:?}",
                layer.shape(),
                target.shape()
            )));
        }
    }
    for (&i, layer) in payload.form.layers.iter().zip(&payload.layers) {
        net.layers[i].clone_from(layer);
    }
    Ok(())
}

/// Square root of the layer's trainable parameter count (weights plus biases).
pub fn effective_layer_width(layer: &LayerParams) -> f64 {
    (layer.param_count() as f64).sqrt()
}

/// Mean absolute per-parameter difference between two payloads of one form.
pub fn manhattan_change(before: &LearngenePayload, after: &LearngenePayload) -> Result<f64> {
    if before.form != after.form
        || before.layers.len() != after.layers.len()
        || before
            .layers
            .iter()
            .zip(&after.layers)
            .any(|(a, b)| a.shape() != b.shape())
    {
        return Err(GrlError::Shape(format!(
            "cannot compare payloads of {} and {}",
            before.form, after.form
        )));
    }
    let n = before.param_count();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = before.values().zip(after.values()).map(|(a, b)| (b - a).abs()).sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{InitMethod, ParameterSet};
    use crate::rng::seeded;

    fn archs(h: usize) -> (NetworkArchitecture, NetworkArchitecture) {
        (
            NetworkArchitecture::new(6, h, 2).unwrap(),
            NetworkArchitecture::new(6, h, 1).unwrap(),
        )
    }

    fn random_genome(h: usize, seed: u64) -> AgentGenome {
        let (a, c) = archs(h);
        AgentGenome::random(&a, &c, InitMethod::Orthogonal, &mut seeded(seed))
    }

    #[test]
    fn form_validation() {
        assert!(LearngeneForm::new(NetworkTag::Actor, [6]).is_err());
        assert!(LearngeneForm::new(NetworkTag::Actor, []).is_err());
        assert!(LearngeneForm::new(NetworkTag::Actor, 0..6).is_err());
        let f = LearngeneForm::new(NetworkTag::Critic, [5, 4, 4]).unwrap();
        assert_eq!(f.layers(), &[4, 5]);
        assert_eq!(f.to_string(), "c45");
        assert_eq!("c45".parse::<LearngeneForm>().unwrap(), f);
        assert!("x45".parse::<LearngeneForm>().is_err());
    }

    #[test]
    fn form_enumeration_counts() {
        let counts: Vec<usize> = (1..=5)
            .map(|n| LearngeneForm::all(NetworkTag::Actor, n).unwrap().len())
            .collect();
        assert_eq!(counts, vec![6, 15, 20, 15, 6]);
        assert!(LearngeneForm::all(NetworkTag::Actor, 6).is_err());
    }

    #[test]
    fn extract_copies_layers() {
        let mut genome = random_genome(8, 1);
        let form = LearngeneForm::new(NetworkTag::Actor, [4, 5]).unwrap();
        let payload = extract_learngene(&genome, &form).unwrap();
        assert_eq!(payload.layers[0], genome.actor.layers[4]);
        assert_eq!(payload.layers[1], genome.actor.layers[5]);
        let snapshot = payload.clone();
        genome.actor.layers[4].weights[0] += 1.0;
        assert_eq!(payload, snapshot);
    }

    #[test]
    fn zero_genome_gives_zero_payload() {
        let (a, c) = archs(4);
        let genome = AgentGenome::zeros(&a, &c);
        let form = LearngeneForm::new(NetworkTag::Critic, [0]).unwrap();
        let payload = extract_learngene(&genome, &form).unwrap();
        assert!(payload.values().all(|&v| v == 0.0));
    }

    #[test]
    fn transplant_is_local_and_idempotent() {
        let donor = random_genome(8, 2);
        let form = LearngeneForm::new(NetworkTag::Actor, [4, 5]).unwrap();
        let payload = extract_learngene(&donor, &form).unwrap();
        let mut host = random_genome(8, 3);
        let before = host.clone();
        transplant_learngene(&payload, &mut host).unwrap();
        for i in 0..4 {
            assert_eq!(host.actor.layers[i], before.actor.layers[i]);
        }
        assert_eq!(host.critic, before.critic);
        assert_eq!(host.log_std, before.log_std);
        assert_eq!(host.actor.layers[4], donor.actor.layers[4]);
        let once = host.clone();
        transplant_learngene(&payload, &mut host).unwrap();
        assert_eq!(host, once);
    }

    #[test]
    fn transplant_into_other_width_fails_untouched() {
        let donor = random_genome(8, 2);
        let form = LearngeneForm::new(NetworkTag::Actor, [3, 4]).unwrap();
        let payload = extract_learngene(&donor, &form).unwrap();
        let mut host = random_genome(12, 3);
        let before = host.clone();
        assert!(matches!(
            transplant_learngene(&payload, &mut host),
            Err(GrlError::Shape(_))
        ));
        assert_eq!(host, before);
    }

    #[test]
    fn effective_widths() {
        let h48 = LayerParams::zeros(48, 48);
        assert!((effective_layer_width(&h48) - 2352f64.sqrt()).abs() < 1e-12);
        assert!((effective_layer_width(&h48) - 48.4974).abs() < 1e-4);
        assert!((effective_layer_width(&LayerParams::zeros(2, 2)) - 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(effective_layer_width(&LayerParams::zeros(1, 1)), 2f64.sqrt());
    }

    #[test]
    fn manhattan_examples() {
        let form = LearngeneForm::new(NetworkTag::Actor, [0]).unwrap();
        let layer = |w: f64, b: f64| LayerParams {
            fan_in: 1,
            fan_out: 1,
            weights: vec![w],
            bias: vec![b],
        };
        let before = LearngenePayload {
            form: form.clone(),
            layers: vec![layer(1.0, 2.0)],
        };
        let after = LearngenePayload {
            form: form.clone(),
            layers: vec![layer(0.0, 4.0)],
        };
        assert_eq!(manhattan_change(&before, &before).unwrap(), 0.0);
        assert_eq!(manhattan_change(&before, &after).unwrap(), 1.5);

        let genome = random_genome(8, 9);
        let form = LearngeneForm::new(NetworkTag::Actor, [1, 2]).unwrap();
        let p = extract_learngene(&genome, &form).unwrap();
        let mut q = p.clone();
        q.layers.iter_mut().for_each(|l| l.values_mut().for_each(|v| *v += 0.1));
        assert!((manhattan_change(&p, &q).unwrap() - 0.1).abs() < 1e-12);

        let other = extract_learngene(&genome, &LearngeneForm::new(NetworkTag::Actor, [1, 3]).unwrap()).unwrap();
        assert!(manhattan_change(&p, &other).is_err());
    }

    #[test]
    fn elw_monotone_in_param_count() {
        let mut prev = 0.0;
        for n in 1..20 {
            let w = effective_layer_width(&LayerParams::zeros(n, 3));
            assert!(w > prev);
            prev = w;
        }
        let _ = ParameterSet::zeros(&archs(3).0);
    }
}
