use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};
use crate::ppo::EpisodeRecord;
use crate::terrain::ObstacleKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub agent_id: usize,
    pub task: ObstacleKind,
    pub raw: f64,
    pub normalized: f64,
}

/// Mean lifetime episode reward plus `zeta`.
pub fn compute_fitness(records: &[EpisodeRecord], zeta: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(GrlError::Empty("episode records"));
    }
    let mean = records.iter().map(|r| r.reward).sum::<f64>() / records.len() as f64;
    Ok(mean + zeta)
}

/// Min-max normalization within each task, scaled by the population's mean
/// raw fitness. A task whose agents all share one fitness maps to 0.5 before
/// scaling.
pub fn normalize_fitness(records: &mut [FitnessRecord]) {
    if records.is_empty() {
        return;
    }
    let mean = records.iter().map(|r| r.raw).sum::<f64>() / records.len() as f64;
    let mut bounds: BTreeMap<ObstacleKind, (f64, f64)> = BTreeMap::new();
    for r in records.iter() {
        let b = bounds.entry(r.task).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        b.0 = b.0.min(r.raw);
        b.1 = b.1.max(r.raw);
    }
    for r in records.iter_mut() {
        let (lo, hi) = bounds[&r.task];
        let unit = if hi > lo { (r.raw - lo) / (hi - lo) } else { 0.5 };
        r.normalized = unit * mean;
    }
}

/// Shuffles the population into groups of `size` (the last group may be
/// smaller) and returns each group's best agent by normalized fitness, lower
/// agent id winning ties.
pub fn run_tournaments<R: Rng + ?Sized>(records: &[FitnessRecord], size: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(rng);
    order
        .chunks(size.max(1))
        .map(|group| {
            let best = group
                .iter()
                .map(|&i| &records[i])
                .reduce(|best, r| {
                    if r.normalized > best.normalized || (r.normalized == best.normalized && r.agent_id < best.agent_id)
                    {
                        r
                    } else {
                        best
                    }
                })
                .expect("chunks are non-empty");
            best.agent_id
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ep(reward: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode: 0,
            reward,
            forward_distance: 0.0,
            control_cost: 0.0,
            steps: 1,
        }
    }

    fn rec(agent_id: usize, task: ObstacleKind, raw: f64) -> FitnessRecord {
        FitnessRecord {
            agent_id,
            task,
            raw,
            normalized: 0.0,
        }
    }

    #[test]
    fn fitness_examples() {
        assert_eq!(compute_fitness(&vec![ep(100.0); 5], 1000.0).unwrap(), 1100.0);
        assert_eq!(compute_fitness(&vec![ep(0.0); 3], 1000.0).unwrap(), 1000.0);
        assert_eq!(
            compute_fitness(&[ep(-10.0), ep(10.0), ep(30.0)], 1000.0).unwrap(),
            1010.0
        );
        assert!(compute_fitness(&[], 1000.0).is_err());
    }

    #[test]
    fn normalization_example() {
        use ObstacleKind::*;
        let mut r = vec![
            rec(0, Step, 1100.0),
            rec(1, Step, 1300.0),
            rec(2, Hill, 1200.0),
            rec(3, Hill, 1400.0),
        ];
        normalize_fitness(&mut r);
        assert_eq!(r[1].normalized, 1250.0);
        assert_eq!(r[0].normalized, 0.0);
        assert_eq!(r[3].normalized, 1250.0);
    }

    #[test]
    fn lone_agent_gets_half_mean() {
        use ObstacleKind::*;
        let mut r = vec![rec(0, Step, 1000.0), rec(1, Step, 1200.0), rec(2, Rubble, 1400.0)];
        normalize_fitness(&mut r);
        assert_eq!(r[2].normalized, 0.5 * 1200.0);
    }

    #[test]
    fn affine_shift_keeps_min_max_term() {
        use ObstacleKind::*;
        let raw = [1010.0, 1100.0, 1033.0, 1200.0, 1150.0];
        let tasks = [Step, Step, Hill, Hill, Hill];
        let build = |f: &dyn Fn(f64) -> f64| {
            let mut r: Vec<_> = raw
                .iter()
                .zip(tasks)
                .enumerate()
                .map(|(i, (&x, t))| rec(i, t, f(x)))
                .collect();
            normalize_fitness(&mut r);
            let mean = r.iter().map(|x| x.raw).sum::<f64>() / r.len() as f64;
            r.iter().map(|x| x.normalized / mean).collect::<Vec<_>>()
        };
        let a = build(&|x| x);
        let b = build(&|x| 3.0 * x + 50.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn full_population_gives_seventeen_winners() {
        let r: Vec<_> = (0..50).map(|i| rec(i, ObstacleKind::Step, i as f64)).collect();
        assert_eq!(run_tournaments(&r, 3, &mut seeded(1)).len(), 17);
    }

    #[test]
    fn winners_are_group_maxima() {
        let mut r: Vec<_> = (0..6).map(|i| rec(i, ObstacleKind::Step, 0.0)).collect();
        for x in r.iter_mut() {
            x.normalized = x.agent_id as f64;
        }
        for seed in 0..20 {
            // reproduce the partition independently and brute-force each maximum
            let mut order: Vec<usize> = (0..6).collect();
            order.shuffle(&mut seeded(seed));
            let expected: Vec<usize> = order.chunks(3).map(|g| *g.iter().max().unwrap()).collect();
            assert_eq!(run_tournaments(&r, 3, &mut seeded(seed)), expected);
        }
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let r: Vec<_> = (0..7).map(|i| rec(i, ObstacleKind::Step, 0.0)).collect();
        let mut order: Vec<usize> = (0..7).collect();
        order.shuffle(&mut seeded(4));
        let expected: Vec<usize> = order.chunks(3).map(|g| *g.iter().min().unwrap()).collect();
        assert_eq!(run_tournaments(&r, 3, &mut seeded(4)), expected);
    }
}
