use std::path::{Path, PathBuf};

use super::checkpoint::{list_checkpoints, Checkpoint};
use super::config::RunConfig;
use super::run::{read_events, read_generations, CHECKPOINT_DIR, CONFIG_FILE};
use crate::analysis::emit_rows as write_rows;
use crate::analysis::{
    form_probability_trace, parameter_change_heatmap, write_heatmap_csv, write_trace_csv, ConvergenceTrace,
};
use crate::error::Result;
use crate::evolution::GeneEvent;

pub const METRICS_DIR: &str = "metrics";

/// Loads every checkpoint of a run, rejecting any written under a different
/// configuration than the run's `config.toml`.
pub fn load_run_checkpoints(run_dir: &Path) -> Result<Vec<Checkpoint>> {
    let cfg_path = run_dir.join(CONFIG_FILE);
    let hash = if cfg_path.exists() {
        Some(RunConfig::load(&cfg_path)?.hash())
    } else {
        None
    };
    list_checkpoints(&run_dir.join(CHECKPOINT_DIR))?
        .into_iter()
        .map(|(_, p)| Checkpoint::load(&p, hash.as_deref()))
        .collect()
}

/// Writes plot-ready CSV tables into `<run_dir>/metrics` and returns their
/// paths. Column order is fixed; a run without data yields header-only files.
pub fn export_metrics(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let out = run_dir.join(METRICS_DIR);
    let generations = read_generations(run_dir)?;
    let events = read_events(run_dir)?;
    let checkpoints = load_run_checkpoints(run_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let p = out.join(name);
        written.push(p.clone());
        p
    };

    let episodes: Vec<_> = generations
        .iter()
        .flat_map(|g| {
            g.agents.iter().flat_map(move |a| {
                a.episodes.iter().map(move |e| {
                    (
                        g.generation,
                        a.agent_id,
                        a.task.name(),
                        e.episode,
                        e.reward,
                        e.forward_distance,
                        e.control_cost,
                        e.steps,
                    )
                })
            })
        })
        .collect();
    write_rows(
        &emit("episodes.csv"),
        &[
            "generation",
            "agent",
            "task",
            "episode",
            "reward",
            "forward_distance",
            "control_cost",
            "steps",
        ],
        &episodes,
    )?;

    let fitness: Vec<_> = generations
        .iter()
        .flat_map(|g| {
            g.agents.iter().map(move |a| {
                (
                    g.generation,
                    a.agent_id,
                    a.task.name(),
                    a.paternal,
                    a.inherited_form.as_ref().map(|f| f.to_string()),
                    a.raw_fitness,
                    a.normalized_fitness,
                    a.winner,
                    a.parameter_change,
                )
            })
        })
        .collect();
    write_rows(
        &emit("fitness.csv"),
        &[
            "generation",
            "agent",
            "task",
            "paternal",
            "inherited_form",
            "raw_fitness",
            "normalized_fitness",
            "winner",
            "parameter_change",
        ],
        &fitness,
    )?;

    let scores: Vec<_> = checkpoints
        .iter()
        .flat_map(|c| {
            c.bank
                .pool
                .iter()
                .map(move |g| (c.generation, g.id, g.form().to_string(), g.score, g.birth_generation))
        })
        .collect();
    write_rows(
        &emit("pool_scores.csv"),
        &["generation", "gene", "form", "score", "birth_generation"],
        &scores,
    )?;

    let trace = if checkpoints.is_empty() {
        ConvergenceTrace {
            generations: vec![],
            probabilities: vec![],
        }
    } else {
        form_probability_trace(&checkpoints)?
    };
    write_trace_csv(&emit("form_probability.csv"), &trace)?;
    write_heatmap_csv(&emit("parameter_change.csv"), &parameter_change_heatmap(&generations))?;

    let rows: Vec<_> = events.iter().map(event_row).collect();
    write_rows(
        &emit("events.csv"),
        &[
            "generation",
            "event",
            "gene",
            "form",
            "parent",
            "ancestor",
            "child",
            "depth",
            "fitness",
            "amount",
            "score",
        ],
        &rows,
    )?;
    Ok(written)
}

type EventRow = (
    u32,
    &'static str,
    Option<u64>,
    Option<String>,
    Option<u64>,
    Option<u64>,
    Option<u64>,
    Option<u32>,
    Option<f64>,
    Option<f64>,
    Option<f64>,
);

fn event_row(e: &GeneEvent) -> EventRow {
    match e {
        GeneEvent::Birth {
            generation,
            gene,
            form,
            parent,
            fitness,
            score,
        } => (
            *generation,
            "birth",
            Some(*gene),
            Some(form.to_string()),
            *parent,
            None,
            None,
            None,
            Some(*fitness),
            None,
            Some(*score),
        ),
        GeneEvent::Admit { generation, gene } => (
            *generation,
            "admit",
            Some(*gene),
            None,
            None,
            None,
            None,
            None,
            None,
            None,
            None,
        ),
        GeneEvent::Evict {
            generation,
            gene,
            replaced_by,
            score,
        } => (
            *generation,
            "evict",
            Some(*gene),
            None,
            None,
            None,
            Some(*replaced_by),
            None,
            None,
            None,
            Some(*score),
        ),
        GeneEvent::Increment {
            generation,
            ancestor,
            child,
            leaf,
            depth,
            fitness,
            amount,
        } => (
            *generation,
            "increment",
            Some(*leaf),
            None,
            None,
            Some(*ancestor),
            Some(*child),
            Some(*depth),
            Some(*fitness),
            Some(*amount),
            None,
        ),
        GeneEvent::Decay { generation } => (
            *generation,
            "decay",
            None,
            None,
            None,
            None,
            None,
            None,
            None,
            None,
            None,
        ),
    }
}
