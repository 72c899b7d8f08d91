//! Suite search: a genetic algorithm over pool positions, plus the random
//! and best-of-k baselines.
//!
//! Suites are represented as vectors of distinct pool positions. Fitness is a
//! caller-supplied function of the position set, typically
//! [`CoverageTable::rank`](crate::coverage::CoverageTable::rank).

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coverage::{CoverageError, TestSuite};
use crate::model::TestPool;
use crate::seeded_rng;

#[derive(Debug, Error, PartialEq)]
pub enum EvolveError {
    #[error("pool has {pool} tests, fewer than the suite size {n}")]
    PoolTooSmall { pool: usize, n: usize },
    #[error("suite size must be at least 1")]
    EmptySuite,
    #[error("invalid parameter {name}: {message}")]
    Parameter { name: &'static str, message: String },
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaParams {
    pub suite_size: usize,
    pub population_size: usize,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    pub tournament_k: usize,
    pub max_generations: usize,
    pub epsilon: f64,
    pub window: usize,
    /// Individuals copied unchanged into the next generation.
    pub elitism: usize,
    pub seed: u64,
}

impl GaParams {
    pub fn new(suite_size: usize, seed: u64) -> Self {
        GaParams {
            suite_size,
            population_size: 100,
            mutation_prob: 0.05,
            crossover_prob: 0.7,
            tournament_k: 3,
            max_generations: 300,
            epsilon: 0.001,
            window: 50,
            elitism: 1,
            seed,
        }
    }

    pub fn validate(&self, pool_len: usize) -> Result<(), EvolveError> {
        let bad = |name, message: &str| {
            Err(EvolveError::Parameter {
                name,
                message: message.to_string(),
            })
        };
        if self.suite_size == 0 {
            return Err(EvolveError::EmptySuite);
        }
        if pool_len < self.suite_size {
            return Err(EvolveError::PoolTooSmall {
                pool: pool_len,
                n: self.suite_size,
            });
        }
        if self.population_size == 0 {
            return bad("population_size", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("mutation_prob", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("crossover_prob", "must lie in [0, 1]");
        }
        if self.tournament_k == 0 || self.tournament_k > self.population_size {
            return bad("tournament_k", "must lie in 1..=population_size");
        }
        if self.max_generations == 0 {
            return bad("max_generations", "must be at least 1");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon", "must be non-negative");
        }
        if self.elitism > self.population_size {
            return bad("elitism", "must not exceed population_size");
        }
        Ok(())
    }
}

/// A suite as distinct pool positions.
pub type Individual = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    MaxGenerations,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub millis: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionLog {
    pub generations: Vec<GenerationStats>,
    pub termination: Termination,
}

impl EvolutionLog {
    pub fn best(&self) -> f64 {
        self.generations.last().map_or(0.0, |g| g.best)
    }

    /// `generation,best,mean,millis`, one row per generation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for g in &self.generations {
            w.serialize(g).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

/// Uniform pool position not in `taken`, or `None` if every position is used.
fn unused_index(taken: &[usize], pool_len: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    if taken.len() >= pool_len {
        return None;
    }
    if taken.len() * 2 <= pool_len {
        loop {
            let c = rng.gen_range(0..pool_len);
            if !taken.contains(&c) {
                return Some(c);
            }
        }
    }
    let free: Vec<usize> = (0..pool_len).filter(|c| !taken.contains(c)).collect();
    free.get(rng.gen_range(0..free.len())).copied()
}

/// Replaces repeated entries with uniform unused pool positions.
pub fn repair(ind: &mut Individual, pool_len: usize, rng: &mut ChaCha8Rng) {
    for i in 1..ind.len() {
        if ind[..i].contains(&ind[i]) {
            let mut taken = ind.clone();
            taken.remove(i);
            if let Some(c) = unused_index(&taken, pool_len, rng) {
                ind[i] = c;
            }
        }
    }
}

fn pmx_child(donor: &[usize], other: &[usize], c1: usize, c2: usize) -> Individual {
    let segment = &donor[c1..c2];
    (0..donor.len())
        .map(|i| {
            if (c1..c2).contains(&i) {
                return donor[i];
            }
            let mut v = other[i];
            // follow the segment mapping donor[j] -> other[j]
            let mut steps = 0;
            while let Some(j) = segment.iter().position(|&s| s == v) {
                v = other[c1 + j];
                steps += 1;
                if steps > segment.len() {
                    break;
                }
            }
            v
        })
        .collect()
}

/// Partially matched crossover with explicit cut points `[c1, c2)`, then
/// repair of any remaining duplicates.
pub fn pmx_crossover_at(
    a: &[usize],
    b: &[usize],
    c1: usize,
    c2: usize,
    pool_len: usize,
    rng: &mut ChaCha8Rng,
) -> (Individual, Individual) {
    assert_eq!(a.len(), b.len(), "parents must have equal length");
    assert!(c1 <= c2 && c2 <= a.len(), "cut points out of range");
    let mut x = pmx_child(a, b, c1, c2);
    let mut y = pmx_child(b, a, c1, c2);
    repair(&mut x, pool_len, rng);
    repair(&mut y, pool_len, rng);
    (x, y)
}

/// Partially matched crossover with uniformly drawn cut points.
pub fn pmx_crossover(
    a: &[usize],
    b: &[usize],
    pool_len: usize,
    rng: &mut ChaCha8Rng,
) -> (Individual, Individual) {
    let n = a.len();
    let mut c1 = rng.gen_range(0..=n);
    let mut c2 = rng.gen_range(0..=n);
    if c1 > c2 {
        std::mem::swap(&mut c1, &mut c2);
    }
    pmx_crossover_at(a, b, c1, c2, pool_len, rng)
}

/// Replaces each gene with probability `p` by a uniform unused position.
pub fn mutate(ind: &mut Individual, pool_len: usize, p: f64, rng: &mut ChaCha8Rng) {
    for i in 0..ind.len() {
        if rng.gen_bool(p) {
            if let Some(c) = unused_index(ind, pool_len, rng) {
                ind[i] = c;
            }
        }
    }
}

fn random_individual(pool_len: usize, n: usize, rng: &mut ChaCha8Rng) -> Individual {
    sample(rng, pool_len, n).into_vec()
}

fn check_size(pool_len: usize, n: usize) -> Result<(), EvolveError> {
    if n == 0 {
        return Err(EvolveError::EmptySuite);
    }
    if pool_len < n {
        return Err(EvolveError::PoolTooSmall { pool: pool_len, n });
    }
    Ok(())
}

/// Uniform `n`-subset of `0..pool_len`.
pub fn random_indices(pool_len: usize, n: usize, seed: u64) -> Result<Individual, EvolveError> {
    check_size(pool_len, n)?;
    Ok(random_individual(pool_len, n, &mut seeded_rng(seed, 0)))
}

/// Best of `k` uniform `n`-subsets; the first sample wins ties.
pub fn best_of_k_indices<F>(
    pool_len: usize,
    n: usize,
    k: usize,
    seed: u64,
    fitness: F,
) -> Result<Individual, EvolveError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    check_size(pool_len, n)?;
    if k == 0 {
        return Err(EvolveError::Parameter {
            name: "k",
            message: "must be at least 1".into(),
        });
    }
    let mut rng = seeded_rng(seed, 0);
    let candidates: Vec<Individual> = (0..k)
        .map(|_| random_individual(pool_len, n, &mut rng))
        .collect();
    let scores: Vec<f64> = candidates.par_iter().map(|c| fitness(c)).collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(candidates.into_iter().nth(best).expect("k >= 1"))
}

/// Genetic search for a high-fitness `n`-subset of `0..pool_len`.
pub fn evolve_indices<F>(
    pool_len: usize,
    params: &GaParams,
    fitness: F,
) -> Result<(Individual, EvolutionLog), EvolveError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    params.validate(pool_len)?;
    let start = Instant::now();
    let mut rng = seeded_rng(params.seed, 0);
    let n = params.suite_size;
    let mut population: Vec<Individual> = (0..params.population_size)
        .map(|_| random_individual(pool_len, n, &mut rng))
        .collect();
    let mut generations = Vec::new();
    let mut termination = Termination::MaxGenerations;
    let mut best_ever: (f64, Individual) = (f64::NEG_INFINITY, population[0].clone());

    for generation in 0..params.max_generations {
        let scores: Vec<f64> = population.par_iter().map(|ind| fitness(ind)).collect();
        let mut order: Vec<usize> = (0..population.len()).collect();
        // stable sort keeps the earlier individual first on ties
        order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]));
        let best = scores[order[0]];
        if best > best_ever.0 {
            best_ever = (best, population[order[0]].clone());
        }
        generations.push(GenerationStats {
            generation,
            best,
            mean: scores.iter().sum::<f64>() / scores.len() as f64,
            millis: start.elapsed().as_millis(),
        });
        if generation >= params.window
            && (best - generations[generation - params.window].best).abs() <= params.epsilon
        {
            termination = Termination::Converged;
            break;
        }
        if generation + 1 == params.max_generations {
            break;
        }

        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut winner = rng.gen_range(0..population.len());
            for _ in 1..params.tournament_k {
                let c = rng.gen_range(0..population.len());
                if scores[c] > scores[winner] {
                    winner = c;
                }
            }
            winner
        };
        let mut next: Vec<Individual> = order[..params.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < params.population_size {
            let p1 = tournament(&mut rng);
            let p2 = tournament(&mut rng);
            let (mut x, mut y) = if rng.gen_bool(params.crossover_prob) {
                pmx_crossover(&population[p1], &population[p2], pool_len, &mut rng)
            } else {
                (population[p1].clone(), population[p2].clone())
            };
            mutate(&mut x, pool_len, params.mutation_prob, &mut rng);
            mutate(&mut y, pool_len, params.mutation_prob, &mut rng);
            next.push(x);
            if next.len() < params.population_size {
                next.push(y);
            }
        }
        population = next;
    }
    Ok((
        best_ever.1,
        EvolutionLog {
            generations,
            termination,
        },
    ))
}

/// Runs [`evolve_indices`] over a pool and returns the suite itself.
pub fn evolve_suite<F>(
    pool: &TestPool,
    params: &GaParams,
    fitness: F,
) -> Result<(TestSuite, EvolutionLog), EvolveError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let (ind, log) = evolve_indices(pool.len(), params, fitness)?;
    Ok((TestSuite::from_pool(pool, &ind)?, log))
}

pub fn random_suite(pool: &TestPool, n: usize, seed: u64) -> Result<TestSuite, EvolveError> {
    let ind = random_indices(pool.len(), n, seed)?;
    Ok(TestSuite::from_pool(pool, &ind)?)
}

pub fn best_of_k<F>(
    pool: &TestPool,
    n: usize,
    k: usize,
    seed: u64,
    fitness: F,
) -> Result<TestSuite, EvolveError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let ind = best_of_k_indices(pool.len(), n, k, seed, fitness)?;
    Ok(TestSuite::from_pool(pool, &ind)?)
}
