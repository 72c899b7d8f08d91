//! Experiment drivers: bug-catch probabilities per generation method, rank
//! comparisons between methods, and the variance-convergence simulation.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::coverage::CoverageTable;
use crate::criteria::CriterionFamily;
use crate::evolve::{
    best_of_k_indices, evolve_indices, random_indices, EvolveError, GaParams, Individual,
};
use crate::model::{Alphabet, TestModel, TestPool};
use crate::risk::Observation;
use crate::seeded_rng;
use crate::sut::{execute, BugSpec, SutError};

/// How a suite is produced from the pool.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Random,
    BestOfK(usize),
    /// Genetic search; `suite_size` and `seed` of the template are overridden.
    Ga(GaParams),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Random => "random".into(),
            Method::BestOfK(k) => format!("best-of-{k}"),
            Method::Ga(_) => "ga".into(),
        }
    }
}

/// Seed of repetition `r` of an experiment seeded with `seed`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(r as u64)
}

/// One suite of `n` pool positions. `table` supplies the fitness and is
/// ignored by the random method.
pub fn generate(
    method: &Method,
    table: &CoverageTable,
    n: usize,
    seed: u64,
) -> Result<Individual, EvolveError> {
    let fitness = |s: &[usize]| table.rank(s) as f64;
    match method {
        Method::Random => random_indices(table.tests(), n, seed),
        Method::BestOfK(k) => best_of_k_indices(table.tests(), n, *k, seed, fitness),
        Method::Ga(template) => {
            let params = GaParams {
                suite_size: n,
                seed,
                ..template.clone()
            };
            evolve_indices(table.tests(), &params, fitness).map(|(ind, _)| ind)
        }
    }
}

/// `repetitions` independent suites.
pub fn generate_many(
    method: &Method,
    table: &CoverageTable,
    n: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<Individual>, EvolveError> {
    (0..repetitions)
        .into_par_iter()
        .map(|r| generate(method, table, n, repetition_seed(seed, r)))
        .collect()
}

/// Per pool test: does it fail against a system armed with `bugs`?
pub fn failure_flags(
    pool: &TestPool,
    alphabet: &Alphabet,
    bugs: &[BugSpec],
) -> Result<Vec<bool>, SutError> {
    pool.cases()
        .par_iter()
        .map(|t| execute(bugs, alphabet, t).map(|v| !v.passed))
        .collect()
}

/// Fraction of suites containing at least one failing test.
pub fn catch_rate(suites: &[Individual], fails: &[bool]) -> f64 {
    if suites.is_empty() {
        return 0.0;
    }
    let caught = suites
        .iter()
        .filter(|s| s.iter().any(|&t| fails[t]))
        .count();
    caught as f64 / suites.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatchRow {
    pub method: String,
    pub bug: String,
    pub n: usize,
    pub repetitions: usize,
    pub probability: f64,
}

/// Catch probability of a single bug for one method and fitness family.
#[allow(clippy::too_many_arguments)]
pub fn catch_probability(
    pool: &TestPool,
    alphabet: &Alphabet,
    family: &CriterionFamily,
    method: &Method,
    bug: &BugSpec,
    n: usize,
    repetitions: usize,
    seed: u64,
) -> Result<f64, crate::Error> {
    let table = CoverageTable::build(family, pool);
    let suites = generate_many(method, &table, n, repetitions, seed)?;
    let fails = failure_flags(pool, alphabet, std::slice::from_ref(bug))?;
    Ok(catch_rate(&suites, &fails))
}

/// Catch probabilities of each bug for random suites and for GA suites
/// optimized for Kuhn–Higdon and for consecutive-window coverage. The tuple
/// length of both fitness families equals the trigger length.
pub fn catch_table(
    pool: &TestPool,
    alphabet: &Alphabet,
    bugs: &[BugSpec],
    ga: &GaParams,
    n: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<CatchRow>, crate::Error> {
    let mut rows = Vec::new();
    let mut cache: Vec<(String, usize, Vec<Individual>)> = Vec::new();
    let mut suites_for = |label: &str,
                          t: usize,
                          family: Option<CriterionFamily>|
     -> Result<Vec<Individual>, crate::Error> {
        if let Some((_, _, s)) = cache.iter().find(|(l, tt, _)| l == label && *tt == t) {
            return Ok(s.clone());
        }
        let suites = match family {
            None => (0..repetitions)
                .map(|r| random_indices(pool.len(), n, repetition_seed(seed, r)))
                .collect::<Result<Vec<_>, _>>()?,
            Some(f) => {
                let table = CoverageTable::build(&f, pool);
                generate_many(&Method::Ga(ga.clone()), &table, n, repetitions, seed)?
            }
        };
        cache.push((label.to_string(), t, suites.clone()));
        Ok(suites)
    };
    for bug in bugs {
        let t = bug.trigger().len();
        let fails = failure_flags(pool, alphabet, std::slice::from_ref(bug))?;
        let variants = [
            ("random", None),
            (
                "kuhn-higdon",
                Some(CriterionFamily::kuhn_higdon(alphabet, t)?),
            ),
            (
                "consecutive-window",
                Some(CriterionFamily::consecutive_window(alphabet, t)?),
            ),
        ];
        for (label, family) in variants {
            let suites = suites_for(label, t, family)?;
            rows.push(CatchRow {
                method: label.to_string(),
                bug: bug.label(),
                n,
                repetitions,
                probability: catch_rate(&suites, &fails),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub fitness: String,
    pub method: String,
    pub n: usize,
    pub runs: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Median wall-clock per run; machine dependent.
    pub median_millis: f64,
}

/// Two-sided 95% Student-t quantile (Cornish–Fisher expansion around the
/// normal quantile; accurate to about 1e-3 for `df >= 5`).
pub fn t_quantile_975(df: usize) -> f64 {
    let z: f64 = 1.959_963_984_540_054;
    let d = df.max(1) as f64;
    z + (z.powi(3) + z) / (4.0 * d)
        + (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / (96.0 * d * d)
        + (3.0 * z.powi(7) + 19.0 * z.powi(5) + 17.0 * z.powi(3) - 15.0 * z) / (384.0 * d.powi(3))
}

/// Mean with a 95% confidence interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = t_quantile_975(values.len() - 1) * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// Mean rank of `runs` suites per method and size.
pub fn rank_table(
    table: &CoverageTable,
    fitness_name: &str,
    methods: &[Method],
    sizes: &[usize],
    runs: usize,
    seed: u64,
) -> Result<Vec<RankRow>, EvolveError> {
    let mut rows = Vec::new();
    for &n in sizes {
        for method in methods {
            let results: Vec<(f64, f64)> = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let start = Instant::now();
                    let ind = generate(method, table, n, repetition_seed(seed, r))?;
                    Ok((
                        table.rank(&ind) as f64,
                        start.elapsed().as_secs_f64() * 1000.0,
                    ))
                })
                .collect::<Result<_, EvolveError>>()?;
            let ranks: Vec<f64> = results.iter().map(|r| r.0).collect();
            let (mean, ci_low, ci_high) = mean_ci(&ranks);
            rows.push(RankRow {
                fitness: fitness_name.to_string(),
                method: method.name(),
                n,
                runs,
                mean,
                ci_low,
                ci_high,
                median_millis: median(results.iter().map(|r| r.1).collect()),
            });
        }
    }
    Ok(rows)
}

/// Runs `tests` raw random walks (duplicates kept) against a system armed
/// with `bugs` and records which indices of `family` each test covered.
pub fn simulate_history(
    model: &TestModel,
    family: &CriterionFamily,
    bugs: &[BugSpec],
    tests: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<Observation>, crate::Error> {
    (0..tests)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(seed, k as u64);
            let test = model.random_walk(&mut rng, max_len)?;
            let verdict = execute(bugs, model.alphabet(), &test)?;
            Ok(Observation {
                test_id: format!("t{k}"),
                hits: family.covered_by(&test),
                passed: verdict.passed,
            })
        })
        .collect::<Result<Vec<_>, crate::Error>>()
}

/// Serializes rows with a header line.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantiles() {
        assert!((t_quantile_975(29) - 2.045).abs() < 1e-3);
        assert!((t_quantile_975(10) - 2.228).abs() < 2e-3);
        assert!((t_quantile_975(1000) - 1.962).abs() < 1e-3);
    }

    #[test]
    fn ci_of_constant_values_is_a_point() {
        assert_eq!(mean_ci(&[3.0, 3.0, 3.0]), (3.0, 3.0, 3.0));
        let (m, lo, hi) = mean_ci(&[1.0, 2.0, 3.0]);
        assert!(lo < m && m < hi);
    }

    #[test]
    fn catch_rate_counts_suites_with_a_failure() {
        let fails = [false, true, false];
        assert_eq!(
            catch_rate(&[vec![0, 2], vec![1], vec![0, 1]], &fails),
            2.0 / 3.0
        );
        assert_eq!(catch_rate(&[], &fails), 0.0);
    }
}
