//! Fitness, tournaments, and the gene pool / gene tree machinery that scores,
//! stores, evolves, and hands down learngenes between generations.

mod engine;
mod events;
mod fitness;
mod pool;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};
use crate::policy::{InitMethod, LearngeneForm, NetworkArchitecture, NetworkTag};

pub use engine::{initialize_generation, GeneBank, Newborn, Winner};
pub use events::GeneEvent;
pub use fitness::{compute_fitness, normalize_fitness, run_tournaments, FitnessRecord};
pub use pool::{
    apply_decay, extraction_probability, form_probability, inheritance_probabilities, sample_from, sample_inheritance,
    CandidateLearngene, FormDistribution, GenePool,
};
pub use tree::{learngene_similarity, score_candidate, update_ancestor_scores, GeneNode, GeneTree, ScoreIncrement};

pub type GeneId = u64;

/// Constants of the generational loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    /// Agents per generation.
    pub population: usize,
    pub tournament_size: usize,
    /// Episodes per agent lifetime.
    pub lifetime: u32,
    /// Offset added to mean episode reward so fitness stays positive.
    pub zeta: f64,
    /// Pool residents per learngene form.
    pub rho_max: usize,
    /// Parental decay of ancestor score updates.
    pub eta: f64,
    /// Per-generation score decay of pool residents.
    pub beta: f64,
    /// Number of training obstacles agents are assigned from.
    pub tasks: usize,
    pub network: NetworkTag,
    /// Layers per learngene.
    pub n_l: usize,
    pub generations: u32,
    pub master_seed: u64,
    /// Initialization of everything outside the inherited learngene.
    pub init_method: InitMethod,
    /// Replacements allowed per form per generation.
    pub max_replacements: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: 12,
            tournament_size: 3,
            lifetime: 20,
            zeta: 1000.0,
            rho_max: 7,
            eta: 0.1,
            beta: 0.02,
            tasks: 4,
            network: NetworkTag::Actor,
            n_l: 2,
            generations: 40,
            master_seed: 0,
            init_method: InitMethod::Orthogonal,
            max_replacements: 2,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(GrlError::Config(m));
        if self.tournament_size < 2 {
            return err(format!(
                "tournament size must be at least 2, got {}",
                self.tournament_size
            ));
        }
        if self.population < self.tournament_size {
            return err(format!(
                "population {} smaller than tournament size {}",
                self.population, self.tournament_size
            ));
        }
        if self.n_l == 0 || self.n_l > 5 {
            return err(format!("n_l must be in [1, 5], got {}", self.n_l));
        }
        if self.lifetime == 0 {
            return err("lifetime must be at least 1 episode".into());
        }
        if self.rho_max == 0 {
            return err("rho_max must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta) {
            return err(format!("beta must be in [0, 1), got {}", self.beta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return err(format!("eta must be non-negative, got {}", self.eta));
        }
        if !self.zeta.is_finite() {
            return err("zeta must be finite".into());
        }
        if self.tasks == 0 || self.tasks > 4 {
            return err(format!("tasks must be in [1, 4], got {}", self.tasks));
        }
        Ok(())
    }

    /// Number of tournaments (and winners) per generation.
    pub fn tournaments(&self) -> usize {
        self.population.div_ceil(self.tournament_size)
    }

    pub fn forms(&self) -> Result<Vec<LearngeneForm>> {
        LearngeneForm::all(self.network, self.n_l)
    }
}

/// Architecture that learngene forms of `tag` refer to.
pub fn network_architecture(
    tag: NetworkTag,
    actor: &NetworkArchitecture,
    critic: &NetworkArchitecture,
) -> NetworkArchitecture {
    match tag {
        NetworkTag::Actor => *actor,
        NetworkTag::Critic => *critic,
    }
}
