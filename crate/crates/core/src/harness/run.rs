use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::checkpoint::{list_checkpoints, Checkpoint};
use super::config::RunConfig;
use super::learner::LifetimeLearner;
use crate::error::{GrlError, Result};
use crate::evolution::{
    compute_fitness, form_probability, initialize_generation, normalize_fitness, run_tournaments, FitnessRecord,
    GeneBank, GeneEvent, GeneId, Winner,
};
use crate::policy::{extract_learngene, manhattan_change, LearngeneForm};
use crate::ppo::{EpisodeRecord, Lifetime};
use crate::rng::{stream_rng, Stream};
use crate::terrain::ObstacleKind;

pub const CONFIG_FILE: &str = "config.toml";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const DIAGNOSTIC_DIR: &str = "diagnostic";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: usize,
    pub task: ObstacleKind,
    pub paternal: Option<GeneId>,
    pub inherited_form: Option<LearngeneForm>,
    pub raw_fitness: f64,
    pub normalized_fitness: f64,
    pub winner: bool,
    /// Mean absolute change of the inherited learngene over the lifetime.
    pub parameter_change: Option<f64>,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u32,
    pub agents: Vec<AgentRecord>,
    /// Tournament winners in group order.
    pub winners: Vec<usize>,
    pub replacements: BTreeMap<LearngeneForm, usize>,
    /// Form probabilities of the pool at the end of the generation.
    pub form_probability: BTreeMap<LearngeneForm, f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunControl {
    /// Continue from the newest checkpoint in the run directory.
    pub resume: bool,
    /// Stop once this many generations have completed, before the configured total.
    pub until: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub bank: GeneBank,
    /// Generations completed, counting those restored from a checkpoint.
    pub completed: u32,
    /// Records of the generations executed by this call.
    pub records: Vec<GenerationRecord>,
    pub events: Vec<GeneEvent>,
    pub final_checkpoint: Option<Checkpoint>,
}

struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn append<T: Serialize>(&self, name: &str, items: &[T]) -> Result<()> {
        let path = self.path(name);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GrlError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            w.write_all(b"\n").map_err(|e| GrlError::io(&path, e))?;
        }
        w.flush().map_err(|e| GrlError::io(&path, e))
    }

    /// Drops log lines from generations at or after `from`, left behind by an
    /// interrupted run.
    fn truncate_logs(&self, from: u32) -> Result<()> {
        #[derive(Deserialize)]
        struct Tagged {
            generation: u32,
        }
        for name in [EVENTS_FILE, GENERATIONS_FILE] {
            let path = self.path(name);
            if !path.exists() {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| GrlError::io(&path, e))?;
            let mut kept = String::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let t: Tagged = serde_json::from_str(line)?;
                if t.generation < from {
                    kept.push_str(line);
                    kept.push('\n');
                }
            }
            fs::write(&path, kept).map_err(|e| GrlError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Reads a JSON-lines file; a missing file reads as empty.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| GrlError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| GrlError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn read_events(run_dir: &Path) -> Result<Vec<GeneEvent>> {
    read_jsonl(&run_dir.join(EVENTS_FILE))
}

pub fn read_generations(run_dir: &Path) -> Result<Vec<GenerationRecord>> {
    read_jsonl(&run_dir.join(GENERATIONS_FILE))
}

/// Newest checkpoint of a run directory.
pub fn latest_checkpoint(run_dir: &Path, expected_hash: Option<&str>) -> Result<Option<Checkpoint>> {
    match list_checkpoints(&run_dir.join(CHECKPOINT_DIR))?.pop() {
        Some((_, path)) => Checkpoint::load(&path, expected_hash).map(Some),
        None => Ok(None),
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GrlError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Runs the generational loop: initialize, train every agent in parallel,
/// normalize fitness, hold tournaments, extract and replace learngenes, decay,
/// and checkpoint. Results depend only on the configuration, never on the
/// worker count or scheduling.
pub fn run_evolution(
    config: &RunConfig,
    learner: &dyn LifetimeLearner,
    run_dir: Option<&Path>,
    control: RunControl,
) -> Result<RunOutcome> {
    config.validate()?;
    let evo = &config.evolution;
    let hash = config.hash();
    let dir = run_dir.map(|root| RunDir {
        root: root.to_path_buf(),
    });

    let mut bank = GeneBank::new(evo)?;
    let mut start = 0;
    if let Some(d) = &dir {
        fs::create_dir_all(&d.root).map_err(|e| GrlError::io(&d.root, e))?;
        let resumed = if control.resume {
            latest_checkpoint(&d.root, Some(&hash))?
        } else {
            None
        };
        match resumed {
            Some(ckpt) => {
                start = ckpt.generation + 1;
                bank = ckpt.bank;
            }
            None => {
                let ckpt_dir = d.path(CHECKPOINT_DIR);
                if ckpt_dir.exists() {
                    fs::remove_dir_all(&ckpt_dir).map_err(|e| GrlError::io(&ckpt_dir, e))?;
                }
            }
        }
        d.truncate_logs(start)?;
        let cfg_path = d.path(CONFIG_FILE);
        fs::write(&cfg_path, config.to_toml()?).map_err(|e| GrlError::io(&cfg_path, e))?;
    }

    let end = control.until.map_or(evo.generations, |u| u.min(evo.generations));
    let actor = config.actor_architecture();
    let critic = config.critic_architecture();
    let gene_arch = config.gene_architecture();
    let workers = thread_pool(config.run.workers)?;
    let mut records = Vec::new();
    let mut all_events = Vec::new();
    let mut final_checkpoint = None;

    for generation in start..end {
        let newborns = initialize_generation(&bank.pool, evo, generation, &actor, &critic)?;
        let lifetimes: Vec<Result<Lifetime>> =
            workers.install(|| newborns.par_iter().map(|n| learner.live(n, generation)).collect());

        let mut trained = Vec::with_capacity(lifetimes.len());
        for (n, result) in newborns.iter().zip(lifetimes) {
            let failed = match &result {
                Err(GrlError::NonFinite(_)) => true,
                Err(_) => false,
                Ok(l) => !l.genome.is_finite() || l.episodes.iter().any(|e| !e.reward.is_finite()),
            };
            if failed {
                if let Some(d) = &dir {
                    let diag = Checkpoint {
                        generation,
                        config_hash: hash.clone(),
                        master_seed: evo.master_seed,
                        bank: bank.clone(),
                    };
                    diag.save(&d.path(DIAGNOSTIC_DIR))?;
                }
                return Err(GrlError::NanAbort {
                    generation,
                    agent: n.agent_id,
                });
            }
            trained.push(result?);
        }

        let mut fitness = newborns
            .iter()
            .zip(&trained)
            .map(|(n, l)| {
                Ok(FitnessRecord {
                    agent_id: n.agent_id,
                    task: n.task,
                    raw: compute_fitness(&l.episodes, evo.zeta)?,
                    normalized: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        normalize_fitness(&mut fitness);
        let winner_ids = run_tournaments(
            &fitness,
            evo.tournament_size,
            &mut stream_rng(evo.master_seed, generation as u64, 0, Stream::Tournament),
        );

        let mut agents = Vec::with_capacity(newborns.len());
        for ((n, l), f) in newborns.iter().zip(&trained).zip(&fitness) {
            let parameter_change = match n.paternal.and_then(|p| bank.pool.get(p)) {
                Some(gene) => Some(manhattan_change(
                    &gene.payload,
                    &extract_learngene(&l.genome, gene.form())?,
                )?),
                None => None,
            };
            agents.push(AgentRecord {
                agent_id: n.agent_id,
                task: n.task,
                paternal: n.paternal,
                inherited_form: n.inherited.clone(),
                raw_fitness: f.raw,
                normalized_fitness: f.normalized,
                winner: winner_ids.contains(&n.agent_id),
                parameter_change,
                episodes: l.episodes.clone(),
            });
        }

        let winners: Vec<Winner<'_>> = winner_ids
            .iter()
            .map(|&id| Winner {
                agent_id: id,
                genome: &trained[id].genome,
                fitness: fitness[id].normalized,
                paternal: newborns[id].paternal,
            })
            .collect();
        let mut events = Vec::new();
        let replacements = bank.extract_and_replace(generation, &winners, evo, &gene_arch, &mut events)?;
        bank.decay(generation, evo.beta, &mut events);

        let record = GenerationRecord {
            generation,
            agents,
            winners: winner_ids,
            replacements,
            form_probability: form_probability(&bank.pool).unwrap_or_default(),
        };
        let last = generation + 1 == end;
        if let Some(d) = &dir {
            d.append(EVENTS_FILE, &events)?;
            d.append(GENERATIONS_FILE, std::slice::from_ref(&record))?;
        }
        if last || (generation + 1) % config.run.checkpoint_every == 0 {
            let ckpt = Checkpoint {
                generation,
                config_hash: hash.clone(),
                master_seed: evo.master_seed,
                bank: bank.clone(),
            };
            if let Some(d) = &dir {
                ckpt.save(&d.path(CHECKPOINT_DIR))?;
            }
            final_checkpoint = Some(ckpt);
        }
        all_events.extend(events);
        records.push(record);
    }

    Ok(RunOutcome {
        bank,
        completed: end.max(start),
        records,
        events: all_events,
        final_checkpoint,
    })
}
