use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeneId;
use crate::error::{GrlError, Result};
use crate::policy::{LearngeneForm, LearngenePayload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLearngene {
    pub id: GeneId,
    pub payload: LearngenePayload,
    pub score: f64,
    pub birth_generation: u32,
}

impl CandidateLearngene {
    pub fn form(&self) -> &LearngeneForm {
        &self.payload.form
    }
}

/// Bounded store of scored learngenes, one slot list per form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenePool {
    capacity: usize,
    slots: BTreeMap<LearngeneForm, Vec<CandidateLearngene>>,
}

pub type FormDistribution = BTreeMap<LearngeneForm, f64>;

impl GenePool {
    pub fn new(forms: impl IntoIterator<Item = LearngeneForm>, capacity: usize) -> Self {
        GenePool {
            capacity,
            slots: forms.into_iter().map(|f| (f, Vec::new())).collect(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn forms(&self) -> impl Iterator<Item = &LearngeneForm> {
        self.slots.keys()
    }

    pub fn residents(&self, form: &LearngeneForm) -> &[CandidateLearngene] {
        self.slots.get(form).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &CandidateLearngene> {
        self.slots.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.slots.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: GeneId) -> Option<&CandidateLearngene> {
        self.iter().find(|c| c.id == id)
    }

    pub fn get_mut(&mut self, id: GeneId) -> Option<&mut CandidateLearngene> {
        self.slots.values_mut().flatten().find(|c| c.id == id)
    }

    pub fn contains(&self, id: GeneId) -> bool {
        self.get(id).is_some()
    }

    /// Sum of resident scores of one form.
    pub fn form_score(&self, form: &LearngeneForm) -> f64 {
        self.residents(form).iter().map(|c| c.score).sum()
    }

    pub fn total_score(&self) -> f64 {
        self.iter().map(|c| c.score).sum()
    }

    /// Adds a resident without eviction. Fails when the form is unknown or full.
    pub fn insert(&mut self, candidate: CandidateLearngene) -> Result<()> {
        let capacity = self.capacity;
        let slot = self
            .slots
            .get_mut(candidate.form())
            .ok_or_else(|| GrlError::InvalidArgument(format!("form {} is not held by this pool", candidate.form())))?;
        if slot.len() >= capacity {
            return Err(GrlError::InvalidArgument(format!(
                "form {} already holds {capacity} residents",
                candidate.form()
            )));
        }
        slot.push(candidate);
        Ok(())
    }

    /// Weakest resident of `form`; among equal scores the oldest.
    pub fn weakest(&self, form: &LearngeneForm) -> Option<&CandidateLearngene> {
        self.residents(form)
            .iter()
            .min_by(|a, b| a.score.total_cmp(&b.score).then(a.id.cmp(&b.id)))
    }

    pub fn remove(&mut self, id: GeneId) -> Option<CandidateLearngene> {
        for slot in self.slots.values_mut() {
            if let Some(pos) = slot.iter().position(|c| c.id == id) {
                return Some(slot.remove(pos));
            }
        }
        None
    }
}

/// Multiplies every resident score by `1 - beta`.
pub fn apply_decay(pool: &mut GenePool, beta: f64) {
    for c in pool.slots.values_mut().flatten() {
        c.score *= 1.0 - beta;
    }
}

fn check_scores(pool: &GenePool) -> Result<f64> {
    if let Some(bad) = pool.iter().find(|c| !(c.score >= 0.0 && c.score.is_finite())) {
        return Err(GrlError::InvalidArgument(format!(
            "gene {} has invalid score {}",
            bad.id, bad.score
        )));
    }
    let total = pool.total_score();
    if total <= 0.0 {
        return Err(GrlError::Empty("pool with positive total score"));
    }
    Ok(total)
}

/// Share of the pool's total score held by each form.
pub fn form_probability(pool: &GenePool) -> Result<FormDistribution> {
    let total = check_scores(pool)?;
    Ok(pool.forms().map(|f| (f.clone(), pool.form_score(f) / total)).collect())
}

/// Distribution over forms an agent extracts from its own parameters: the
/// paternal form gets raw weight 1, every other form its form probability.
pub fn extraction_probability(p_form: &FormDistribution, paternal: Option<&LearngeneForm>) -> FormDistribution {
    let weight = |f: &LearngeneForm, p: f64| if Some(f) == paternal { 1.0 } else { p };
    let total: f64 = p_form.iter().map(|(f, &p)| weight(f, p)).sum();
    p_form.iter().map(|(f, &p)| (f.clone(), weight(f, p) / total)).collect()
}

/// Probability that a newborn inherits each resident.
pub fn inheritance_probabilities(pool: &GenePool) -> Result<Vec<(GeneId, f64)>> {
    let total = check_scores(pool)?;
    let mut out = Vec::with_capacity(pool.len());
    for form in pool.forms() {
        let s_form = pool.form_score(form);
        for c in pool.residents(form) {
            let p_form = s_form / total;
            let p = if s_form > 0.0 { p_form * c.score / s_form } else { 0.0 };
            out.push((c.id, p));
        }
    }
    Ok(out)
}

/// Draws one key of a discrete distribution.
pub fn sample_from<'a, K, R: Rng + ?Sized>(dist: impl IntoIterator<Item = (&'a K, f64)>, rng: &mut R) -> Option<&'a K>
where
    K: 'a,
{
    let items: Vec<(&K, f64)> = dist.into_iter().filter(|(_, p)| *p > 0.0).collect();
    let total: f64 = items.iter().map(|(_, p)| p).sum();
    let last = items.last()?.0;
    let mut u = rng.random::<f64>() * total;
    for (k, p) in items {
        if u < p {
            return Some(k);
        }
        u -= p;
    }
    Some(last)
}

/// Two-stage draw: a form by form probability, then a resident of that form
/// proportionally to its score.
pub fn sample_inheritance<'a, R: Rng + ?Sized>(pool: &'a GenePool, rng: &mut R) -> Result<&'a CandidateLearngene> {
    let p_form = form_probability(pool)?;
    let form = sample_from(p_form.iter().map(|(f, &p)| (f, p)), rng).ok_or(GrlError::Empty("gene pool"))?;
    let residents = pool.residents(form);
    let idx: Vec<usize> = (0..residents.len()).collect();
    let pick =
        sample_from(idx.iter().map(|i| (i, residents[*i].score)), rng).ok_or(GrlError::Empty("form residents"))?;
    Ok(&residents[*pick])
}
