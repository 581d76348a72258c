use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use crate::evolution::{learngene_similarity, score_candidate, GeneEvent, GeneId};
use crate::policy::LearngeneForm;

/// Absolute tolerance (relative above magnitude 1) for replayed scores.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub gene: Option<GeneId>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub generation: u32,
    pub events: usize,
    pub residents: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn offending_genes(&self) -> Vec<GeneId> {
        let mut genes: Vec<GeneId> = self.mismatches.iter().filter_map(|m| m.gene).collect();
        genes.sort();
        genes.dedup();
        genes
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "{verdict}: generation {}, {} events, {} residents, {} mismatches",
            self.generation,
            self.events,
            self.residents,
            self.mismatches.len()
        )?;
        for m in &self.mismatches {
            match m.gene {
                Some(g) => writeln!(f, "  gene {g}: {}", m.reason)?,
                None => writeln!(f, "  {}", m.reason)?,
            }
        }
        Ok(())
    }
}

struct BirthFact {
    form: LearngeneForm,
    parent: Option<GeneId>,
    generation: u32,
    score: f64,
    fitness: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REPLAY_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Rebuilds every resident score from the event log using the configured
/// constants and compares the result with the checkpoint. Logged derived
/// values (birth scores, increment amounts) are cross-checked as well.
pub fn replay_verify(checkpoint: &Checkpoint, events: &[GeneEvent], config: &RunConfig) -> ReplayReport {
    let arch = config.gene_architecture();
    let eta = config.evolution.eta;
    let beta = config.evolution.beta;
    let mut mismatches = Vec::new();
    let mut flag = |gene: Option<GeneId>, reason: String| mismatches.push(Mismatch { gene, reason });

    let mut births: BTreeMap<GeneId, BirthFact> = BTreeMap::new();
    let mut residents: BTreeMap<GeneId, f64> = BTreeMap::new();
    let mut last_generation = 0;
    let mut decays: BTreeMap<u32, usize> = BTreeMap::new();
    let mut count = 0;
    let capacity = config.evolution.rho_max;
    let mut pending: Option<GeneId> = None;

    for ev in events.iter().filter(|e| e.generation() <= checkpoint.generation) {
        count += 1;
        let g = ev.generation();
        if g < last_generation {
            flag(
                None,
                format!("event of generation {g} after generation {last_generation}"),
            );
        }
        last_generation = last_generation.max(g);
        if !matches!(ev, GeneEvent::Admit { .. }) {
            if let Some(r) = pending.take() {
                flag(Some(r), "eviction not followed by its admission".into());
            }
        }
        match ev {
            GeneEvent::Birth {
                gene,
                form,
                parent,
                fitness,
                score,
                ..
            } => {
                match score_candidate(*fitness, form, &arch) {
                    Ok(s) => {
                        if births.contains_key(gene) {
                            flag(Some(*gene), "born twice".into());
                        }
                        if !close(s, *score) {
                            flag(Some(*gene), format!("logged birth score {score} but fitness gives {s}"));
                        }
                        births.insert(
                            *gene,
                            BirthFact {
                                form: form.clone(),
                                parent: *parent,
                                generation: g,
                                score: s,
                                fitness: *fitness,
                            },
                        );
                    }
                    Err(e) => flag(Some(*gene), e.to_string()),
                }
                if let Some(p) = parent {
                    if !births.contains_key(p) {
                        flag(Some(*gene), format!("parent {p} born after child"));
                    }
                }
            }
            GeneEvent::Admit { gene, .. } => match births.get(gene) {
                Some(b) => {
                    match pending.take() {
                        Some(r) if r != *gene => {
                            flag(Some(*gene), format!("admitted after an eviction naming gene {r}"))
                        }
                        Some(_) => {}
                        None => {
                            let held = residents.keys().filter(|id| births[*id].form == b.form).count();
                            if held >= capacity {
                                flag(Some(*gene), format!("admitted into full form {}", b.form));
                            }
                        }
                    }
                    if b.generation != g {
                        flag(
                            Some(*gene),
                            format!("admitted in generation {g} but born in {}", b.generation),
                        );
                    }
                    if residents.insert(*gene, b.score).is_some() {
                        flag(Some(*gene), "admitted while already resident".into());
                    }
                }
                None => flag(Some(*gene), "admitted without a birth".into()),
            },
            GeneEvent::Evict {
                gene,
                replaced_by,
                score,
                ..
            } => {
                if let Some(r) = pending.replace(*replaced_by) {
                    flag(Some(r), "eviction not followed by its admission".into());
                }
                match (births.get(gene), births.get(replaced_by)) {
                    (Some(old), Some(new)) if new.generation == g && new.form == old.form => {
                        // the evicted gene must be the weakest of its form and strictly beaten
                        let weakest = residents
                            .iter()
                            .filter(|(id, _)| births[*id].form == old.form)
                            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
                            .map(|(id, _)| *id);
                        if weakest != Some(*gene) {
                            flag(Some(*gene), "evicted gene was not the weakest of its form".into());
                        }
                        if new.score <= *score {
                            flag(Some(*gene), format!("replacement {replaced_by} does not outscore it"));
                        }
                    }
                    _ => flag(
                        Some(*gene),
                        format!("replacement {replaced_by} is not a newborn of the same form"),
                    ),
                }
                match residents.remove(gene) {
                    Some(s) if close(s, *score) => {}
                    Some(s) => flag(Some(*gene), format!("evicted with logged score {score}, replayed {s}")),
                    None => flag(Some(*gene), "evicted while not resident".into()),
                }
            }
            GeneEvent::Increment {
                ancestor,
                child,
                leaf,
                depth,
                fitness,
                amount,
                ..
            } => {
                match births.get(leaf) {
                    Some(b) if b.generation == g && close(b.fitness, *fitness) => {}
                    _ => flag(
                        Some(*ancestor),
                        format!("increment from gene {leaf} does not match its birth"),
                    ),
                }
                let (Some(a), Some(c)) = (births.get(ancestor), births.get(child)) else {
                    flag(Some(*ancestor), format!("increment references unknown child {child}"));
                    continue;
                };
                // the child must sit directly below the ancestor on the leaf's lineage
                let mut path = vec![*leaf];
                while path.len() <= *depth as usize {
                    match births.get(path.last().expect("non-empty")).and_then(|b| b.parent) {
                        Some(p) => path.push(p),
                        None => break,
                    }
                }
                let d = *depth as usize;
                if d == 0 || path.get(d) != Some(ancestor) || path.get(d - 1) != Some(child) {
                    flag(
                        Some(*ancestor),
                        format!("gene {child} at depth {depth} is not on the lineage of {leaf}"),
                    );
                }
                let expected = learngene_similarity(&a.form, &c.form, &arch) * eta.powi(*depth as i32 + 1) * fitness;
                if !close(expected, *amount) {
                    flag(
                        Some(*ancestor),
                        format!("logged increment {amount} but recomputed {expected}"),
                    );
                }
                match residents.get_mut(ancestor) {
                    Some(s) => *s += expected,
                    None => flag(Some(*ancestor), "increment to a non-resident".into()),
                }
            }
            GeneEvent::Decay { .. } => {
                *decays.entry(g).or_default() += 1;
                for s in residents.values_mut() {
                    *s *= 1.0 - beta;
                }
            }
        }
    }

    if let Some(r) = pending {
        flag(Some(r), "eviction not followed by its admission".into());
    }
    for g in 0..=checkpoint.generation {
        let n = decays.get(&g).copied().unwrap_or(0);
        if n != 1 {
            flag(None, format!("generation {g} has {n} decay events"));
        }
    }

    let actual: BTreeMap<GeneId, f64> = checkpoint.bank.pool.iter().map(|c| (c.id, c.score)).collect();
    for (id, score) in &actual {
        match residents.get(id) {
            Some(r) if close(*r, *score) => {}
            Some(r) => flag(Some(*id), format!("checkpoint score {score}, replayed {r}")),
            None => flag(Some(*id), "resident in checkpoint but not in replay".into()),
        }
    }
    for node in checkpoint.bank.tree.nodes() {
        match births.get(&node.id) {
            Some(b) if node.parent == b.parent && node.birth_generation == b.generation && node.form == b.form => {}
            Some(_) => flag(Some(node.id), "tree node disagrees with birth event".into()),
            None => flag(Some(node.id), "tree node has no birth event".into()),
        }
    }
    for id in births.keys().filter(|id| checkpoint.bank.tree.get(**id).is_none()) {
        flag(Some(*id), "birth event missing from the tree".into());
    }
    for id in residents.keys().filter(|id| !actual.contains_key(id)) {
        flag(Some(*id), "resident in replay but not in checkpoint".into());
    }
    ReplayReport {
        generation: checkpoint.generation,
        events: count,
        residents: actual.len(),
        mismatches,
    }
}
