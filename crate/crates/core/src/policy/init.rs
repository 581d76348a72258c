use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::LayerParams;
use crate::error::GrlError;

/// Weight initialization schemes for dense layers. Biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Orthogonal,
    XavierUniform,
    XavierNormal,
    KaimingUniform,
    KaimingNormal,
}

impl InitMethod {
    pub const ALL: [InitMethod; 5] = [
        InitMethod::Orthogonal,
        InitMethod::XavierUniform,
        InitMethod::XavierNormal,
        InitMethod::KaimingUniform,
        InitMethod::KaimingNormal,
    ];

    pub fn layer<R: Rng + ?Sized>(self, fan_in: usize, fan_out: usize, rng: &mut R) -> LayerParams {
        let n = fan_in * fan_out;
        let fan_sum = (fan_in + fan_out) as f64;
        let weights = match self {
            InitMethod::Orthogonal => orthogonal(fan_in, fan_out, rng),
            InitMethod::XavierUniform => uniform(n, (6.0 / fan_sum).sqrt(), rng),
            InitMethod::XavierNormal => normal(n, (2.0 / fan_sum).sqrt(), rng),
            // ReLU gain sqrt(2), fan-in mode
            InitMethod::KaimingUniform => uniform(n, (6.0 / fan_in as f64).sqrt(), rng),
            InitMethod::KaimingNormal => normal(n, (2.0 / fan_in as f64).sqrt(), rng),
        };
        LayerParams {
            fan_in,
            fan_out,
            weights,
            bias: vec![0.0; fan_out],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitMethod::Orthogonal => "orthogonal",
            InitMethod::XavierUniform => "xavier_uniform",
            InitMethod::XavierNormal => "xavier_normal",
            InitMethod::KaimingUniform => "kaiming_uniform",
            InitMethod::KaimingNormal => "kaiming_normal",
        }
    }
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitMethod {
    type Err = GrlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InitMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GrlError::InvalidArgument(format!("unknown init method `{s}`")))
    }
}

fn uniform<R: Rng + ?Sized>(n: usize, bound: f64, rng: &mut R) -> Vec<f64> {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn normal<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Semi-orthogonal matrix via QR of a Gaussian matrix, with the sign of R's
/// diagonal folded into Q so the result is uniformly distributed.
fn orthogonal<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<f64> {
    let (rows, cols) = (fan_in.max(fan_out), fan_in.min(fan_out));
    let gauss = DMatrix::<f64>::from_fn(rows, cols, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    // q is rows x cols with orthonormal columns; weights are fan_out x fan_in
    let w = if fan_out >= fan_in { q } else { q.transpose() };
    let mut out = Vec::with_capacity(fan_in * fan_out);
    for o in 0..fan_out {
        for i in 0..fan_in {
            out.push(w[(o, i)]);
        }
    }
    out
}
