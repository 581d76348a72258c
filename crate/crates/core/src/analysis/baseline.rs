use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{instinct_probe, InstinctReport, INSTINCT_INTERVAL};
use crate::error::{GrlError, Result};
use crate::evolution::{form_probability, sample_from, GeneId, GenePool};
use crate::harness::RunConfig;
use crate::policy::{transplant_learngene, AgentGenome, LearngeneForm};
use crate::ppo::{train_lifetime, EpisodeRecord};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::terrain::{generate_combined, generate_heightfield, ObstacleKind, TerrainEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    /// Random initialization.
    Scratch,
    /// A gene of the pool's most probable form over a random initialization.
    Learngene,
    /// Pre-trained for this many lifetimes on the combined training track.
    Pretrain(u32),
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::Scratch => f.write_str("scratch"),
            BaselineKind::Learngene => f.write_str("learngene"),
            BaselineKind::Pretrain(i) => write!(f, "pretrain_{i}"),
        }
    }
}

impl FromStr for BaselineKind {
    type Err = GrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(BaselineKind::Scratch),
            "learngene" => Ok(BaselineKind::Learngene),
            other => other
                .strip_prefix("pretrain_")
                .and_then(|i| i.parse().ok())
                .filter(|&i: &u32| i > 0)
                .map(BaselineKind::Pretrain)
                .ok_or_else(|| {
                    GrlError::InvalidArgument(format!(
                        "unknown baseline {other:?} (expected scratch, learngene or pretrain_<i>)"
                    ))
                }),
        }
    }
}

pub struct BaselineContext<'a> {
    pub config: &'a RunConfig,
    /// Final pool of an evolution run; needed by the learngene baseline.
    pub pool: Option<&'a GenePool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub kind: BaselineKind,
    pub task: ObstacleKind,
    pub seed: u64,
    pub gene: Option<GeneId>,
    /// Behavior on the target obstacle before any training on it.
    pub instinct: InstinctReport,
    pub curve: Vec<EpisodeRecord>,
}

/// Form with the largest form probability; lower form wins ties.
pub fn optimal_form(pool: &GenePool) -> Result<LearngeneForm> {
    let p = form_probability(pool)?;
    let best = p
        .iter()
        .fold(None::<(&LearngeneForm, f64)>, |best, (f, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((f, v)),
        })
        .ok_or(GrlError::Empty("gene pool"))?;
    Ok(best.0.clone())
}

/// Trains one agent for `episodes` episodes on a fresh instance of `task`.
/// Runs sharing a seed share the random initialization and the terrain, so
/// kinds can be compared pairwise.
pub fn run_baseline(
    kind: BaselineKind,
    task: ObstacleKind,
    episodes: u32,
    seed: u64,
    ctx: &BaselineContext<'_>,
) -> Result<BaselineRun> {
    let config = ctx.config;
    let mut genome = AgentGenome::random(
        &config.actor_architecture(),
        &config.critic_architecture(),
        config.evolution.init_method,
        &mut stream_rng(seed, 0, 0, Stream::Baseline),
    );
    let mut gene = None;
    match kind {
        BaselineKind::Scratch => {}
        BaselineKind::Learngene => {
            let pool = ctx
                .pool
                .ok_or_else(|| GrlError::MissingCheckpoint("learngene baseline needs a gene pool".into()))?;
            let form = optimal_form(pool)?;
            let residents = pool.residents(&form);
            let pick = sample_from(
                residents.iter().map(|c| (c, c.score)),
                &mut stream_rng(seed, 0, 1, Stream::Inherit),
            )
            .ok_or(GrlError::Empty("optimal form residents"))?;
            transplant_learngene(&pick.payload, &mut genome)?;
            gene = Some(pick.id);
        }
        BaselineKind::Pretrain(i) => {
            let track = generate_combined(derive_seed(seed, 0, 2, Stream::Terrain), config.env.terrain_scale)?;
            let mut env = TerrainEnv::new(Arc::new(track), config.env);
            let lifetimes = i * config.evolution.lifetime;
            genome = train_lifetime(
                genome,
                &mut env,
                lifetimes,
                &config.ppo,
                derive_seed(seed, 0, 2, Stream::Train),
            )?
            .genome;
        }
    }

    let track = generate_heightfield(task, derive_seed(seed, 0, 1, Stream::Terrain), config.env.terrain_scale)?;
    let mut env = TerrainEnv::new(Arc::new(track), config.env);
    let probe_steps = config.env.t_end.max(INSTINCT_INTERVAL);
    let instinct = instinct_probe(&genome, &mut env, probe_steps, INSTINCT_INTERVAL)?;
    let curve = if episodes == 0 {
        Vec::new()
    } else {
        train_lifetime(
            genome,
            &mut env,
            episodes,
            &config.ppo,
            derive_seed(seed, 0, 0, Stream::Train),
        )?
        .episodes
    };
    Ok(BaselineRun {
        kind,
        task,
        seed,
        gene,
        instinct,
        curve,
    })
}
