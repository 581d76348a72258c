//! Measurements taken on trained agents and evolution runs: transfer rates,
//! newborn behavior, learning-curve baselines, and convergence summaries.

mod baseline;
mod emit;
mod stats;
mod transfer;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};
use crate::evolution::{form_probability, sample_inheritance, GenePool};
use crate::harness::{Checkpoint, GenerationRecord, RunConfig};
use crate::policy::{transplant_learngene, AgentGenome, LearngeneForm};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::terrain::{generate_heightfield, ObstacleKind, TerrainEnv};

pub use baseline::{optimal_form, run_baseline, BaselineContext, BaselineKind, BaselineRun};
pub(crate) use emit::write_rows as emit_rows;
pub use emit::{write_curves_csv, write_heatmap_csv, write_trace_csv, write_transfer_csv, CurveSummary};
pub use stats::{bootstrap_ci, ConfidenceInterval};
pub use transfer::{knowledge_transfer_rate, transfer_matrix, TransferMatrix, TransferSettings};

/// Default spacing of trajectory samples in a probe.
pub const INSTINCT_INTERVAL: u32 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstinctReport {
    /// `(step, x)` every `interval` steps.
    pub samples: Vec<(u32, f64)>,
    pub forward_distance: f64,
    pub control_cost: f64,
    pub steps: u32,
}

/// Runs the mean-action policy for up to `steps` steps (or until the episode
/// ends) without touching any parameter.
pub fn instinct_probe(genome: &AgentGenome, env: &mut TerrainEnv, steps: u32, interval: u32) -> Result<InstinctReport> {
    if interval == 0 || steps < interval {
        return Err(GrlError::InvalidArgument(format!(
            "probe needs steps >= interval > 0, got steps {steps}, interval {interval}"
        )));
    }
    let mut obs = env.reset();
    let start = env.state().x;
    let mut samples = Vec::new();
    let mut control_cost = 0.0;
    let mut taken = 0;
    while taken < steps {
        let action = genome.actor.forward(&obs)?;
        let out = env.step(&action)?;
        taken += 1;
        control_cost += out.control_cost;
        obs = out.obs;
        if taken % interval == 0 {
            samples.push((taken, out.state.x));
        }
        if out.done {
            break;
        }
    }
    Ok(InstinctReport {
        samples,
        forward_distance: env.state().x - start,
        control_cost,
        steps: taken,
    })
}

/// Paired newborn probes: for each seed, one agent carrying a gene sampled
/// from `pool` and one purely random agent sharing the same initialization of
/// everything else, probed on the same obstacle instance. Seeds cycle through
/// the training obstacles unless `task` is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstinctComparison {
    pub tasks: Vec<ObstacleKind>,
    pub learngene: Vec<InstinctReport>,
    pub random: Vec<InstinctReport>,
}

pub fn compare_instincts(
    config: &RunConfig,
    pool: &GenePool,
    task: Option<ObstacleKind>,
    seeds: u64,
    interval: u32,
) -> Result<InstinctComparison> {
    let mut out = InstinctComparison {
        tasks: Vec::new(),
        learngene: Vec::new(),
        random: Vec::new(),
    };
    let steps = config.env.t_end.max(interval);
    for seed in 0..seeds {
        let kind = task.unwrap_or(ObstacleKind::TRAINING[(seed % 4) as usize]);
        let random = AgentGenome::random(
            &config.actor_architecture(),
            &config.critic_architecture(),
            config.evolution.init_method,
            &mut stream_rng(seed, 0, 0, Stream::Baseline),
        );
        let mut carrier = random.clone();
        let gene = sample_inheritance(pool, &mut stream_rng(seed, 0, 1, Stream::Inherit))?;
        transplant_learngene(&gene.payload, &mut carrier)?;
        let track = Arc::new(generate_heightfield(
            kind,
            derive_seed(seed, 0, 1, Stream::Terrain),
            config.env.terrain_scale,
        )?);
        let mut env = TerrainEnv::new(track, config.env);
        out.learngene.push(instinct_probe(&carrier, &mut env, steps, interval)?);
        out.random.push(instinct_probe(&random, &mut env, steps, interval)?);
        out.tasks.push(kind);
    }
    Ok(out)
}

/// Per-generation form probabilities read from pool checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub generations: Vec<u32>,
    pub probabilities: Vec<BTreeMap<LearngeneForm, f64>>,
}

impl ConvergenceTrace {
    pub fn forms(&self) -> Vec<LearngeneForm> {
        self.probabilities
            .first()
            .map(|p| p.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn final_probability(&self, form: &LearngeneForm) -> Option<f64> {
        self.probabilities.last().and_then(|p| p.get(form).copied())
    }
}

pub fn form_probability_trace(checkpoints: &[Checkpoint]) -> Result<ConvergenceTrace> {
    if checkpoints.is_empty() {
        return Err(GrlError::MissingCheckpoint("no checkpoints to trace".into()));
    }
    let mut trace = ConvergenceTrace {
        generations: Vec::new(),
        probabilities: Vec::new(),
    };
    for c in checkpoints {
        trace.generations.push(c.generation);
        trace.probabilities.push(form_probability(&c.bank.pool)?);
    }
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub generation: u32,
    pub form: LearngeneForm,
    pub mean_change: f64,
    /// Distinct inherited genes of this form in the generation.
    pub genes: usize,
}

/// Mean Manhattan change of inherited learngenes over a lifetime, averaged
/// first over each gene's carriers and then over the genes of a form.
pub fn parameter_change_heatmap(records: &[GenerationRecord]) -> Vec<HeatmapCell> {
    let mut cells = Vec::new();
    for rec in records {
        let mut per_gene: BTreeMap<(LearngeneForm, u64), (f64, usize)> = BTreeMap::new();
        for a in &rec.agents {
            if let (Some(gene), Some(form), Some(change)) = (a.paternal, &a.inherited_form, a.parameter_change) {
                let e = per_gene.entry((form.clone(), gene)).or_insert((0.0, 0));
                e.0 += change;
                e.1 += 1;
            }
        }
        let mut per_form: BTreeMap<LearngeneForm, (f64, usize)> = BTreeMap::new();
        for ((form, _), (sum, n)) in per_gene {
            let e = per_form.entry(form).or_insert((0.0, 0));
            e.0 += sum / n as f64;
            e.1 += 1;
        }
        for (form, (sum, n)) in per_form {
            cells.push(HeatmapCell {
                generation: rec.generation,
                form,
                mean_change: sum / n as f64,
                genes: n,
            });
        }
    }
    cells
}
