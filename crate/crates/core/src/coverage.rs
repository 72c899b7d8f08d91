//! Ranking functions and the coverage ratio.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::criteria::{CriteriaError, CriterionFamily};
use crate::model::{TestCase, TestModel, TestPool};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoverageError {
    #[error("no index is feasible on this model; the coverage ratio is undefined")]
    NoFeasibleIndex,
    #[error("pool index {0} is out of range")]
    PoolIndex(usize),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
}

/// A set of distinct tests.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestSuite {
    tests: Vec<TestCase>,
}

impl TestSuite {
    /// Builds a suite, dropping repeated tests (first occurrence wins).
    pub fn new(tests: Vec<TestCase>) -> Self {
        let mut seen = HashSet::new();
        TestSuite {
            tests: tests
                .into_iter()
                .filter(|t| seen.insert(t.clone()))
                .collect(),
        }
    }

    /// The pool tests at `indices`.
    pub fn from_pool(pool: &TestPool, indices: &[usize]) -> Result<Self, CoverageError> {
        let tests = indices
            .iter()
            .map(|&i| {
                pool.cases()
                    .get(i)
                    .cloned()
                    .ok_or(CoverageError::PoolIndex(i))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TestSuite::new(tests))
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Adds `test` unless it is already present; returns whether it was added.
    pub fn insert(&mut self, test: TestCase) -> bool {
        if self.tests.contains(&test) {
            false
        } else {
            self.tests.push(test);
            true
        }
    }
}

/// Sorted positions of every index covered by at least one test of `suite`.
pub fn covered_indices(family: &CriterionFamily, suite: &TestSuite) -> Vec<usize> {
    let mut flags = vec![false; family.len()];
    for t in suite.tests() {
        for i in family.covered_by(t) {
            flags[i] = true;
        }
    }
    flags
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect()
}

/// Number of distinct indices covered by the suite.
pub fn rank(family: &CriterionFamily, suite: &TestSuite) -> usize {
    covered_indices(family, suite).len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexStatus {
    pub index: String,
    pub feasible: bool,
    pub covered: bool,
}

/// Covered and feasible index counts for one suite on one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub family: String,
    pub total: usize,
    pub feasible: usize,
    pub covered: usize,
    /// `covered/feasible` as an exact fraction, unreduced.
    pub ratio_exact: (usize, usize),
    pub ratio: f64,
    /// True when some index was ruled out only up to an artificial length cap.
    pub capped: bool,
    pub indices: Vec<IndexStatus>,
}

impl CoverageReport {
    /// Every feasible index is covered.
    pub fn is_full(&self) -> bool {
        self.covered == self.feasible
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// One row per index: `index,feasible,covered`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "feasible", "covered"])
            .expect("in-memory write");
        for s in &self.indices {
            w.write_record([
                s.index.as_str(),
                &s.feasible.to_string(),
                &s.covered.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

/// Coverage ratio of `suite` against the traces of `model`.
///
/// An index counts as feasible when the emptiness check finds a witness or
/// when a suite test covers it; the second case only matters when a length
/// cap hid a long witness.
pub fn coverage_ratio(
    family: &CriterionFamily,
    suite: &TestSuite,
    model: &TestModel,
    len_cap: Option<usize>,
) -> Result<CoverageReport, CoverageError> {
    let (mut feasible, capped_any) = family.feasible_indices(model, len_cap)?;
    let mut covered = vec![false; family.len()];
    for i in covered_indices(family, suite) {
        covered[i] = true;
        feasible[i] = true;
    }
    // a capped answer stays suspicious only if the index is still infeasible
    let capped = capped_any && feasible.iter().any(|f| !f);
    let n_feasible = feasible.iter().filter(|&&f| f).count();
    if n_feasible == 0 {
        return Err(CoverageError::NoFeasibleIndex);
    }
    let n_covered = covered.iter().filter(|&&c| c).count();
    let indices = (0..family.len())
        .map(|i| IndexStatus {
            index: family.label(i),
            feasible: feasible[i],
            covered: covered[i],
        })
        .collect();
    Ok(CoverageReport {
        family: family.id().to_string(),
        total: family.len(),
        feasible: n_feasible,
        covered: n_covered,
        ratio_exact: (n_covered, n_feasible),
        ratio: n_covered as f64 / n_feasible as f64,
        capped,
        indices,
    })
}

/// Whether every index reachable in the model is covered by the suite.
/// Vacuously true when no index is feasible.
pub fn covers(
    family: &CriterionFamily,
    suite: &TestSuite,
    model: &TestModel,
    len_cap: Option<usize>,
) -> Result<bool, CoverageError> {
    match coverage_ratio(family, suite, model, len_cap) {
        Ok(report) => Ok(report.is_full()),
        Err(CoverageError::NoFeasibleIndex) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Per-test coverage bitsets over a pool, for fast repeated ranking of
/// suites given as pool positions.
#[derive(Debug, Clone)]
pub struct CoverageTable {
    words: usize,
    indices: usize,
    rows: Vec<u64>,
}

impl CoverageTable {
    pub fn build(family: &CriterionFamily, pool: &TestPool) -> Self {
        let words = family.len().div_ceil(64).max(1);
        let rows: Vec<Vec<u64>> = pool
            .cases()
            .par_iter()
            .map(|t| {
                let mut row = vec![0u64; words];
                for i in family.covered_by(t) {
                    row[i / 64] |= 1 << (i % 64);
                }
                row
            })
            .collect();
        CoverageTable {
            words,
            indices: family.len(),
            rows: rows.concat(),
        }
    }

    pub fn tests(&self) -> usize {
        self.rows.len() / self.words
    }

    pub fn index_count(&self) -> usize {
        self.indices
    }

    pub fn row(&self, test: usize) -> &[u64] {
        &self.rows[test * self.words..(test + 1) * self.words]
    }

    pub fn covers(&self, test: usize, index: usize) -> bool {
        self.row(test)[index / 64] >> (index % 64) & 1 == 1
    }

    /// Rank of the suite made of the given pool tests.
    pub fn rank(&self, suite: &[usize]) -> usize {
        (0..self.words)
            .map(|w| {
                suite
                    .iter()
                    .fold(0u64, |acc, &t| acc | self.rows[t * self.words + w])
                    .count_ones() as usize
            })
            .sum()
    }

    /// Positions covered by the suite, sorted.
    pub fn covered(&self, suite: &[usize]) -> Vec<usize> {
        (0..self.indices)
            .filter(|&i| suite.iter().any(|&t| self.covers(t, i)))
            .collect()
    }

    /// Indices covered by test `test`, sorted.
    pub fn hits(&self, test: usize) -> Vec<usize> {
        (0..self.indices)
            .filter(|&i| self.covers(test, i))
            .collect()
    }
}
