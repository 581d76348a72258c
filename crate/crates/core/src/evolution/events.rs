use serde::{Deserialize, Serialize};

use super::GeneId;
use crate::policy::LearngeneForm;

/// Append-only record of everything that changes the pool or tree.
/// Entries hold facts only; scores are recomputed on replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GeneEvent {
    /// A gene was extracted from a winner of normalized fitness `fitness`.
    Birth {
        generation: u32,
        gene: GeneId,
        form: LearngeneForm,
        parent: Option<GeneId>,
        fitness: f64,
        score: f64,
    },
    Admit {
        generation: u32,
        gene: GeneId,
    },
    /// `score` is the evicted gene's score at the moment of eviction.
    Evict {
        generation: u32,
        gene: GeneId,
        replaced_by: GeneId,
        score: f64,
    },
    /// Score propagated to `ancestor` from the birth of `leaf`.
    Increment {
        generation: u32,
        ancestor: GeneId,
        child: GeneId,
        leaf: GeneId,
        depth: u32,
        fitness: f64,
        amount: f64,
    },
    /// End-of-generation decay of every resident.
    Decay {
        generation: u32,
    },
}

impl GeneEvent {
    pub fn generation(&self) -> u32 {
        match *self {
            GeneEvent::Birth { generation, .. }
            | GeneEvent::Admit { generation, .. }
            | GeneEvent::Evict { generation, .. }
            | GeneEvent::Increment { generation, .. }
            | GeneEvent::Decay { generation } => generation,
        }
    }
}
