use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pool::{apply_decay, extraction_probability, form_probability, sample_from, sample_inheritance};
use super::tree::{score_candidate, update_ancestor_scores};
use super::{CandidateLearngene, EvolutionConfig, GeneEvent, GeneId, GeneNode, GenePool, GeneTree};
use crate::error::{GrlError, Result};
use crate::policy::{extract_learngene, transplant_learngene, AgentGenome, LearngeneForm, NetworkArchitecture};
use crate::rng::{stream_rng, Stream};
use crate::terrain::ObstacleKind;

/// A tournament winner as seen by the evolution phase.
#[derive(Clone, Copy, Debug)]
pub struct Winner<'a> {
    pub agent_id: usize,
    pub genome: &'a AgentGenome,
    pub fitness: f64,
    pub paternal: Option<GeneId>,
}

/// Newly initialized agent of a generation.
#[derive(Clone, Debug)]
pub struct Newborn {
    pub agent_id: usize,
    pub genome: AgentGenome,
    pub task: ObstacleKind,
    pub paternal: Option<GeneId>,
    pub inherited: Option<LearngeneForm>,
}

/// Gene pool plus gene tree plus the id counter, mutated only between
/// generations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneBank {
    pub pool: GenePool,
    pub tree: GeneTree,
    pub next_gene_id: GeneId,
}

impl GeneBank {
    pub fn new(config: &EvolutionConfig) -> Result<Self> {
        Ok(GeneBank {
            pool: GenePool::new(config.forms()?, config.rho_max),
            tree: GeneTree::new(),
            next_gene_id: 0,
        })
    }

    fn birth(
        &mut self,
        generation: u32,
        winner: &Winner<'_>,
        form: &LearngeneForm,
        parent: Option<GeneId>,
        arch: &NetworkArchitecture,
        events: &mut Vec<GeneEvent>,
    ) -> Result<CandidateLearngene> {
        let payload = extract_learngene(winner.genome, form)?;
        let score = score_candidate(winner.fitness, form, arch)?;
        let id = self.next_gene_id;
        self.next_gene_id += 1;
        self.tree.insert(GeneNode {
            id,
            form: form.clone(),
            parent,
            children: Vec::new(),
            birth_generation: generation,
            birth_fitness: winner.fitness,
            birth_score: score,
            in_pool: false,
        })?;
        events.push(GeneEvent::Birth {
            generation,
            gene: id,
            form: form.clone(),
            parent,
            fitness: winner.fitness,
            score,
        });
        Ok(CandidateLearngene {
            id,
            payload,
            score,
            birth_generation: generation,
        })
    }

    fn admit(&mut self, generation: u32, candidate: CandidateLearngene, events: &mut Vec<GeneEvent>) -> Result<()> {
        let id = candidate.id;
        self.pool.insert(candidate)?;
        self.tree.set_in_pool(id, true);
        events.push(GeneEvent::Admit { generation, gene: id });
        Ok(())
    }

    /// Fills every form with `rho_max` roots drawn from the winners, without
    /// repeats while the winners last.
    fn bootstrap<R: Rng + ?Sized>(
        &mut self,
        generation: u32,
        winners: &[Winner<'_>],
        arch: &NetworkArchitecture,
        rng: &mut R,
        events: &mut Vec<GeneEvent>,
    ) -> Result<()> {
        let forms: Vec<LearngeneForm> = self.pool.forms().cloned().collect();
        let capacity = self.pool.capacity();
        for form in &forms {
            let mut picks: Vec<usize> = Vec::with_capacity(capacity);
            while picks.len() < capacity {
                let mut round: Vec<usize> = (0..winners.len()).collect();
                round.shuffle(rng);
                picks.extend(round.into_iter().take(capacity - picks.len()));
            }
            for i in picks {
                let cand = self.birth(generation, &winners[i], form, None, arch, events)?;
                self.admit(generation, cand, events)?;
            }
        }
        Ok(())
    }

    /// Runs one evolution phase: extraction of one candidate per winner,
    /// ancestor score propagation, and bounded strict-improvement replacement.
    /// An empty pool is instead filled by the generation-0 bootstrap.
    /// Returns the number of replacements per form.
    pub fn extract_and_replace(
        &mut self,
        generation: u32,
        winners: &[Winner<'_>],
        config: &EvolutionConfig,
        arch: &NetworkArchitecture,
        events: &mut Vec<GeneEvent>,
    ) -> Result<BTreeMap<LearngeneForm, usize>> {
        if winners.is_empty() {
            return Err(GrlError::Empty("winners"));
        }
        let mut rng = stream_rng(config.master_seed, generation as u64, 0, Stream::Extraction);
        if self.pool.is_empty() {
            self.bootstrap(generation, winners, arch, &mut rng, events)?;
            return Ok(self.pool.forms().map(|f| (f.clone(), 0)).collect());
        }

        let p_form = form_probability(&self.pool)?;
        let mut fresh: Vec<CandidateLearngene> = Vec::with_capacity(winners.len());
        for w in winners {
            let paternal_form = w.paternal.and_then(|p| self.tree.get(p)).map(|n| n.form.clone());
            let h = extraction_probability(&p_form, paternal_form.as_ref());
            let form = sample_from(h.iter().map(|(f, &p)| (f, p)), &mut rng)
                .ok_or(GrlError::Empty("extraction distribution"))?
                .clone();
            fresh.push(self.birth(generation, w, &form, w.paternal, arch, events)?);
        }

        for (cand, w) in fresh.iter().zip(winners) {
            for inc in update_ancestor_scores(&self.tree, &mut self.pool, cand.id, w.fitness, config.eta, arch)? {
                events.push(GeneEvent::Increment {
                    generation,
                    ancestor: inc.ancestor,
                    child: inc.child,
                    leaf: cand.id,
                    depth: inc.depth,
                    fitness: w.fitness,
                    amount: inc.amount,
                });
            }
        }

        let mut by_form: BTreeMap<LearngeneForm, Vec<CandidateLearngene>> = BTreeMap::new();
        for c in fresh {
            by_form.entry(c.form().clone()).or_default().push(c);
        }
        let mut replaced: BTreeMap<LearngeneForm, usize> = self.pool.forms().map(|f| (f.clone(), 0)).collect();
        for (form, mut cands) in by_form {
            cands.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
            let mut count = 0;
            for cand in cands {
                if count >= config.max_replacements {
                    break;
                }
                let Some(weakest) = self.pool.weakest(&form) else { break };
                if cand.score <= weakest.score {
                    break;
                }
                let (evicted, evicted_score) = (weakest.id, weakest.score);
                self.pool.remove(evicted);
                self.tree.set_in_pool(evicted, false);
                events.push(GeneEvent::Evict {
                    generation,
                    gene: evicted,
                    replaced_by: cand.id,
                    score: evicted_score,
                });
                self.admit(generation, cand, events)?;
                count += 1;
            }
            replaced.insert(form, count);
        }
        Ok(replaced)
    }

    pub fn decay(&mut self, generation: u32, beta: f64, events: &mut Vec<GeneEvent>) {
        apply_decay(&mut self.pool, beta);
        events.push(GeneEvent::Decay { generation });
    }
}

/// Creates the agents of one generation. With an empty pool every agent is
/// randomly initialized; otherwise each inherits a sampled learngene over a
/// random initialization of the remaining parameters.
pub fn initialize_generation(
    pool: &GenePool,
    config: &EvolutionConfig,
    generation: u32,
    actor: &NetworkArchitecture,
    critic: &NetworkArchitecture,
) -> Result<Vec<Newborn>> {
    let training = &ObstacleKind::TRAINING[..config.tasks];
    (0..config.population)
        .map(|agent_id| {
            let stream = |s| stream_rng(config.master_seed, generation as u64, agent_id as u64, s);
            let mut genome = AgentGenome::random(actor, critic, config.init_method, &mut stream(Stream::Init));
            let (paternal, inherited) = if pool.is_empty() {
                (None, None)
            } else {
                let gene = sample_inheritance(pool, &mut stream(Stream::Inherit))?;
                transplant_learngene(&gene.payload, &mut genome)?;
                (Some(gene.id), Some(gene.form().clone()))
            };
            let task = training[stream(Stream::Task).random_range(0..training.len())];
            Ok(Newborn {
                agent_id,
                genome,
                task,
                paternal,
                inherited,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{InitMethod, NetworkTag};
    use crate::rng::seeded;

    fn archs() -> (NetworkArchitecture, NetworkArchitecture) {
        (
            NetworkArchitecture::new(6, 4, 2).unwrap(),
            NetworkArchitecture::new(6, 4, 1).unwrap(),
        )
    }

    fn genomes(n: usize) -> Vec<AgentGenome> {
        let (a, c) = archs();
        (0..n)
            .map(|i| AgentGenome::random(&a, &c, InitMethod::Orthogonal, &mut seeded(i as u64)))
            .collect()
    }

    fn winners<'a>(g: &'a [AgentGenome], fitness: &[f64], paternal: &[Option<GeneId>]) -> Vec<Winner<'a>> {
        g.iter()
            .enumerate()
            .map(|(i, genome)| Winner {
                agent_id: i,
                genome,
                fitness: fitness[i],
                paternal: paternal[i],
            })
            .collect()
    }

    #[test]
    fn bootstrap_fills_every_form() {
        let cfg = EvolutionConfig::default();
        let (a, _) = archs();
        let g = genomes(4);
        let mut bank = GeneBank::new(&cfg).unwrap();
        let mut ev = Vec::new();
        bank.extract_and_replace(
            0,
            &winners(&g, &[10.0, 20.0, 30.0, 40.0], &[None; 4]),
            &cfg,
            &a,
            &mut ev,
        )
        .unwrap();
        assert_eq!(bank.pool.forms().count(), 15);
        for f in bank.pool.forms() {
            assert_eq!(bank.pool.residents(f).len(), 7);
        }
        assert_eq!(bank.tree.roots().count(), 105);
        assert!(bank.tree.nodes().all(|n| n.in_pool));
    }

    #[test]
    fn bootstrap_without_repeats_when_winners_suffice() {
        let cfg = EvolutionConfig {
            population: 30,
            n_l: 5,
            ..Default::default()
        };
        let (a, _) = archs();
        let g = genomes(10);
        let fit: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let mut bank = GeneBank::new(&cfg).unwrap();
        bank.extract_and_replace(0, &winners(&g, &fit, &[None; 10]), &cfg, &a, &mut Vec::new())
            .unwrap();
        for f in bank.pool.forms() {
            let mut fits: Vec<u64> = bank
                .pool
                .residents(f)
                .iter()
                .map(|c| bank.tree.get(c.id).unwrap().birth_fitness as u64)
                .collect();
            fits.sort();
            fits.dedup();
            assert_eq!(fits.len(), 7);
        }
    }

    fn single_form_bank(cfg: &EvolutionConfig, arch: &NetworkArchitecture, scores: &[f64]) -> GeneBank {
        let form = LearngeneForm::new(NetworkTag::Actor, [4, 5]).unwrap();
        let mut bank = GeneBank {
            pool: GenePool::new(vec![form.clone()], cfg.rho_max),
            tree: GeneTree::new(),
            next_gene_id: 0,
        };
        let g = genomes(1);
        let w = Winner {
            agent_id: 0,
            genome: &g[0],
            fitness: 0.0,
            paternal: None,
        };
        for &s in scores {
            let mut c = bank.birth(0, &w, &form, None, arch, &mut Vec::new()).unwrap();
            c.score = s;
            bank.admit(0, c, &mut Vec::new()).unwrap();
        }
        bank
    }

    #[test]
    fn at_most_two_replacements_per_form() {
        let cfg = EvolutionConfig {
            n_l: 2,
            eta: 0.0,
            ..Default::default()
        };
        let (a, _) = archs();
        let mut bank = single_form_bank(&cfg, &a, &[0.001; 7]);
        let g = genomes(5);
        let w = winners(&g, &[1e6; 5], &[Some(0); 5]);
        let replaced = bank.extract_and_replace(1, &w, &cfg, &a, &mut Vec::new()).unwrap();
        assert_eq!(replaced.values().sum::<usize>(), 2);
        assert_eq!(bank.pool.len(), 7);
        assert_eq!(bank.tree.len(), 12);
        assert_eq!(bank.tree.nodes().filter(|n| !n.in_pool).count(), 5);
    }

    #[test]
    fn weak_candidates_leave_pool_unchanged() {
        let cfg = EvolutionConfig {
            eta: 0.0,
            ..Default::default()
        };
        let (a, _) = archs();
        let mut bank = single_form_bank(&cfg, &a, &[1e9; 7]);
        let before = bank.pool.clone();
        let g = genomes(3);
        let w = winners(&g, &[1.0; 3], &[Some(0); 3]);
        let replaced = bank.extract_and_replace(1, &w, &cfg, &a, &mut Vec::new()).unwrap();
        assert_eq!(replaced.values().sum::<usize>(), 0);
        assert_eq!(bank.pool, before);
        assert_eq!(bank.tree.get(7).unwrap().parent, Some(0));
    }

    #[test]
    fn initialization_inherits_resident_payloads() {
        let cfg = EvolutionConfig::default();
        let (a, c) = archs();
        let gen0 = initialize_generation(&GenePool::new(cfg.forms().unwrap(), 7), &cfg, 0, &a, &c).unwrap();
        assert_eq!(gen0.len(), cfg.population);
        assert!(gen0.iter().all(|n| n.paternal.is_none()));

        let g = genomes(4);
        let mut bank = GeneBank::new(&cfg).unwrap();
        bank.extract_and_replace(
            0,
            &winners(&g, &[1.0, 2.0, 3.0, 4.0], &[None; 4]),
            &cfg,
            &a,
            &mut Vec::new(),
        )
        .unwrap();
        let gen1 = initialize_generation(&bank.pool, &cfg, 1, &a, &c).unwrap();
        for n in &gen1 {
            let gene = bank.pool.get(n.paternal.unwrap()).unwrap();
            assert_eq!(extract_learngene(&n.genome, gene.form()).unwrap(), gene.payload);
        }
    }

    #[test]
    fn task_assignment_is_uniform() {
        let cfg = EvolutionConfig {
            population: 10_000,
            ..Default::default()
        };
        let (a, c) = archs();
        let pop = initialize_generation(&GenePool::new(cfg.forms().unwrap(), 7), &cfg, 0, &a, &c).unwrap();
        let n = pop.len() as f64;
        for kind in ObstacleKind::TRAINING {
            let k = pop.iter().filter(|x| x.task == kind).count() as f64;
            let sigma = (n * 0.25 * 0.75).sqrt();
            assert!((k - n / 4.0).abs() < 3.0 * sigma, "{kind:?}: {k}");
        }
    }
}
