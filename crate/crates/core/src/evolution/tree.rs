use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pool::GenePool;
use super::GeneId;
use crate::error::{GrlError, Result};
use crate::policy::{LearngeneForm, NetworkArchitecture};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneNode {
    pub id: GeneId,
    pub form: LearngeneForm,
    pub parent: Option<GeneId>,
    pub children: Vec<GeneId>,
    pub birth_generation: u32,
    /// Normalized fitness of the agent the gene was extracted from.
    pub birth_fitness: f64,
    pub birth_score: f64,
    pub in_pool: bool,
}

/// Genealogy of every learngene ever extracted. Roots are the generation-0
/// extractions; each later gene hangs under the gene its carrier inherited.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneTree {
    nodes: BTreeMap<GeneId, GeneNode>,
}

impl GeneTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: GeneId) -> Option<&GeneNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GeneNode> {
        self.nodes.values()
    }

    pub fn roots(&self) -> impl Iterator<Item = &GeneNode> {
        self.nodes.values().filter(|n| n.parent.is_none())
    }

    pub fn insert(&mut self, node: GeneNode) -> Result<()> {
        if self.nodes.contains_key(&node.id) {
            return Err(GrlError::InvalidArgument(format!("gene {} already in tree", node.id)));
        }
        if let Some(p) = node.parent {
            let parent = self
                .nodes
                .get_mut(&p)
                .ok_or_else(|| GrlError::InvalidArgument(format!("parent gene {p} not in tree")))?;
            parent.children.push(node.id);
        }
        self.nodes.insert(node.id, node);
        Ok(())
    }

    pub fn set_in_pool(&mut self, id: GeneId, in_pool: bool) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.in_pool = in_pool;
        }
    }

    /// Ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: GeneId) -> Vec<GeneId> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(&id).and_then(|n| n.parent);
        while let Some(a) = cur {
            out.push(a);
            cur = self.nodes.get(&a).and_then(|n| n.parent);
        }
        out
    }

    pub fn depth(&self, id: GeneId) -> usize {
        self.ancestors(id).len()
    }

    /// Root of the forest containing `id`.
    pub fn root_of(&self, id: GeneId) -> GeneId {
        self.ancestors(id).last().copied().unwrap_or(id)
    }
}

/// Score of a new candidate: its carrier's normalized fitness divided by the
/// summed effective widths of its layers.
pub fn score_candidate(normalized_fitness: f64, form: &LearngeneForm, arch: &NetworkArchitecture) -> Result<f64> {
    if !(normalized_fitness >= 0.0 && normalized_fitness.is_finite()) {
        return Err(GrlError::InvalidArgument(format!(
            "normalized fitness must be finite and non-negative, got {normalized_fitness}"
        )));
    }
    Ok(normalized_fitness / form.effective_width(arch))
}

/// Effective width of the shared layers over that of all layers of either
/// form; forms over different networks share nothing.
pub fn learngene_similarity(a: &LearngeneForm, b: &LearngeneForm, arch: &NetworkArchitecture) -> f64 {
    if a.network() != b.network() {
        return 0.0;
    }
    let (mut inter, mut union) = (0.0, 0.0);
    for layer in 0..crate::policy::NUM_LAYERS {
        let (ina, inb) = (a.contains(layer), b.contains(layer));
        if ina || inb {
            let w = arch.layer_effective_width(layer);
            union += w;
            if ina && inb {
                inter += w;
            }
        }
    }
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreIncrement {
    pub ancestor: GeneId,
    /// Node directly below the ancestor on the path to the new gene.
    pub child: GeneId,
    /// Edges between ancestor and new gene.
    pub depth: u32,
    pub amount: f64,
}

/// Propagates a new gene's fitness up its lineage. An ancestor `l` edges
/// above the gene gains `sim(ancestor, child) * eta^(l+1) * fitness`; ancestors
/// that have left the pool are skipped but do not stop the walk.
pub fn update_ancestor_scores(
    tree: &GeneTree,
    pool: &mut GenePool,
    leaf: GeneId,
    fitness: f64,
    eta: f64,
    arch: &NetworkArchitecture,
) -> Result<Vec<ScoreIncrement>> {
    let mut child = tree
        .get(leaf)
        .ok_or_else(|| GrlError::InvalidArgument(format!("gene {leaf} not in tree")))?;
    let mut out = Vec::new();
    for (l, ancestor) in tree.ancestors(leaf).into_iter().enumerate() {
        let depth = l as u32 + 1;
        let node = tree.get(ancestor).expect("ancestor ids come from the tree");
        if let Some(resident) = pool.get_mut(ancestor) {
            let sim = learngene_similarity(&node.form, &child.form, arch);
            let amount = sim * eta.powi(depth as i32 + 1) * fitness;
            if amount != 0.0 {
                resident.score += amount;
                out.push(ScoreIncrement {
                    ancestor,
                    child: child.id,
                    depth,
                    amount,
                });
            }
        }
        child = node;
    }
    Ok(out)
}
