//! Generalized coverage criteria for combinatorial sequence testing.
//!
//! The crate is organized around the testing pipeline:
//!
//! * [`model`]: test models as labeled transition systems, random-walk pools
//!   and trace counting.
//! * [`criteria`]: coverage-criterion families (t-way, Kuhn–Higdon
//!   t-sequences, consecutive windows, message order, transaction safety,
//!   board symmetries, custom regular languages) and their relaxations.
//! * [`coverage`]: ranking functions and the coverage ratio.
//! * [`evolve`]: the genetic search for high-rank suites plus the random and
//!   best-of-k baselines.
//! * [`risk`]: Beta-Bernoulli risk tracking per criterion.
//! * [`sut`]: an executable alternating-bit protocol with injectable bugs.
//! * [`experiments`]: the catch-probability, ranking and variance experiments.
//!
//! The guide under `book/` walks through each of these with runnable snippets.

pub mod abp_model;
pub mod automaton;
pub mod coverage;
pub mod criteria;
pub mod evolve;
pub mod experiments;
pub mod model;
pub mod regex;
pub mod risk;
pub mod sut;
pub mod tictactoe;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use coverage::{CoverageReport, CoverageTable, TestSuite};
pub use criteria::{CriterionFamily, CriterionIndex, CriterionSpec, IndexPartition};
pub use model::{Alphabet, Event, TestCase, TestModel, TestPool};

/// Deterministic generator for stream `stream` of `seed`.
///
/// Every randomized operation that fans out (walk `k` of a pool, repetition
/// `r` of an experiment) draws from its own stream so that results do not
/// depend on scheduling.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Criteria(#[from] criteria::CriteriaError),
    #[error(transparent)]
    Coverage(#[from] coverage::CoverageError),
    #[error(transparent)]
    Evolve(#[from] evolve::EvolveError),
    #[error(transparent)]
    Risk(#[from] risk::RiskError),
    #[error(transparent)]
    Sut(#[from] sut::SutError),
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/models.md")]
    pub struct Models;
    #[doc = include_str!("../../../book/src/criteria.md")]
    pub struct Criteria;
    #[doc = include_str!("../../../book/src/coverage.md")]
    pub struct Coverage;
    #[doc = include_str!("../../../book/src/generation.md")]
    pub struct Generation;
    #[doc = include_str!("../../../book/src/risk.md")]
    pub struct Risk;
    #[doc = include_str!("../../../book/src/abp.md")]
    pub struct Abp;
    #[doc = include_str!("../../../book/src/symmetry.md")]
    pub struct Symmetry;
}
