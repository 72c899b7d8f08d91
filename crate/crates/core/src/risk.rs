//! Beta-Bernoulli risk tracking per criterion index.
//!
//! Each index `i` carries a `Beta(α, β)` belief about the probability that a
//! test covering `i` runs without exposing a bug. Counts are exact integers;
//! means and variances are read out in `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("index {index} is outside the universe of {universe} indices")]
    UnknownIndex { index: usize, universe: usize },
    #[error("negative {what} {value} for index {index}")]
    Negative {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("partition weights sum to {0}, not 1")]
    NotAPartition(f64),
    #[error("profile or loss model covers {got} indices, expected {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("no candidate to choose from")]
    NoCandidates,
    #[error("no index meets min_coverage = {0}")]
    NoIndexQualifies(u64),
    #[error("history: {0}")]
    History(String),
}

/// Which outcome increments `α`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// A passing test increments `α`; `α/(α+β)` estimates the no-bug probability.
    #[default]
    AlphaCountsPasses,
    /// A failing test increments `α`; `β/(α+β)` estimates the no-bug probability.
    AlphaCountsBugs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha: u64,
    pub beta: u64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        BetaPrior { alpha: 1, beta: 1 }
    }
}

impl BetaPrior {
    pub fn new(alpha: u64, beta: u64) -> Self {
        assert!(alpha >= 1 && beta >= 1, "Beta parameters start at 1");
        BetaPrior { alpha, beta }
    }

    pub fn mean(&self) -> f64 {
        self.alpha as f64 / (self.alpha + self.beta) as f64
    }

    pub fn variance(&self) -> f64 {
        let (a, b) = (self.alpha as f64, self.beta as f64);
        let s = a + b;
        a * b / (s * s * (s + 1.0))
    }

    /// Observations folded in so far.
    pub fn observations(&self) -> u64 {
        self.alpha + self.beta - 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskState {
    priors: Vec<BetaPrior>,
    convention: Convention,
}

impl RiskState {
    pub fn new(universe: usize, convention: Convention) -> Self {
        RiskState {
            priors: vec![BetaPrior::default(); universe],
            convention,
        }
    }

    pub fn universe(&self) -> usize {
        self.priors.len()
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn prior(&self, index: usize) -> BetaPrior {
        self.priors[index]
    }

    pub fn priors(&self) -> &[BetaPrior] {
        &self.priors
    }

    pub fn hits(&self, index: usize) -> u64 {
        self.priors[index].observations()
    }

    /// Posterior mean of "no bug when `index` is covered".
    pub fn no_bug_mean(&self, index: usize) -> f64 {
        let p = self.priors[index];
        match self.convention {
            Convention::AlphaCountsPasses => p.mean(),
            Convention::AlphaCountsBugs => 1.0 - p.mean(),
        }
    }

    pub fn variance(&self, index: usize) -> f64 {
        self.priors[index].variance()
    }

    fn check(&self, index: usize) -> Result<(), RiskError> {
        if index < self.priors.len() {
            Ok(())
        } else {
            Err(RiskError::UnknownIndex {
                index,
                universe: self.priors.len(),
            })
        }
    }

    /// Folds in one test outcome for every index the test covered. Nothing is
    /// updated if any index is unknown.
    pub fn observe(&mut self, hits: &[usize], passed: bool) -> Result<(), RiskError> {
        for &i in hits {
            self.check(i)?;
        }
        let bump_alpha = passed == (self.convention == Convention::AlphaCountsPasses);
        for &i in hits {
            let p = &mut self.priors[i];
            if bump_alpha {
                p.alpha += 1;
            } else {
                p.beta += 1;
            }
        }
        Ok(())
    }

    /// Back to `Beta(1,1)` everywhere.
    pub fn reset(&mut self) {
        self.priors
            .iter_mut()
            .for_each(|p| *p = BetaPrior::default());
    }

    /// `index → {alpha, beta}` keyed by `labels[index]`.
    pub fn snapshot_json(&self, labels: &[String]) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .priors
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let key = labels.get(i).cloned().unwrap_or_else(|| i.to_string());
                (key, serde_json::json!({"alpha": p.alpha, "beta": p.beta}))
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("snapshot serialization cannot fail")
    }
}

/// Usage weights `P(X_C(i) = 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageProfile {
    weights: Vec<f64>,
    partition: bool,
}

impl UsageProfile {
    /// Arbitrary non-negative weights. With `partition = true` they must sum
    /// to 1 (within 1e-9).
    pub fn new(weights: Vec<f64>, partition: bool) -> Result<Self, RiskError> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) {
                return Err(RiskError::Negative {
                    what: "weight",
                    index: i,
                    value: w,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if partition && (sum - 1.0).abs() > 1e-9 {
            return Err(RiskError::NotAPartition(sum));
        }
        Ok(UsageProfile { weights, partition })
    }

    /// Equal weight on every index flagged `true`.
    pub fn uniform(mask: &[bool]) -> Self {
        let k = mask.iter().filter(|&&m| m).count().max(1) as f64;
        UsageProfile {
            weights: mask
                .iter()
                .map(|&m| if m { 1.0 / k } else { 0.0 })
                .collect(),
            partition: true,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_partition(&self) -> bool {
        self.partition
    }

    pub fn remainder(&self) -> f64 {
        1.0 - self.weights.iter().sum::<f64>()
    }
}

/// Losses `l(C(i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    losses: Vec<f64>,
}

impl LossModel {
    pub fn new(losses: Vec<f64>) -> Result<Self, RiskError> {
        for (i, &l) in losses.iter().enumerate() {
            if !(l >= 0.0) {
                return Err(RiskError::Negative {
                    what: "loss",
                    index: i,
                    value: l,
                });
            }
        }
        Ok(LossModel { losses })
    }

    pub fn constant(universe: usize, loss: f64) -> Result<Self, RiskError> {
        Self::new(vec![loss; universe])
    }

    pub fn loss(&self, index: usize) -> f64 {
        self.losses[index]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, RiskError> {
        Self::new(self.losses.iter().map(|l| l * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Likelihood {
    /// `Σ_i E_i · w_i` with `E_i` the no-bug posterior mean.
    pub no_bug: f64,
    /// `1 − no_bug`; meaningful only when `partition_valid`.
    pub bug: f64,
    pub partition_valid: bool,
}

fn check_len(got: usize, expected: usize) -> Result<(), RiskError> {
    if got == expected {
        Ok(())
    } else {
        Err(RiskError::SizeMismatch { got, expected })
    }
}

pub fn bug_likelihood(state: &RiskState, profile: &UsageProfile) -> Result<Likelihood, RiskError> {
    check_len(profile.weights.len(), state.universe())?;
    let no_bug: f64 = profile
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| state.no_bug_mean(i) * w)
        .sum();
    Ok(Likelihood {
        no_bug,
        bug: 1.0 - no_bug,
        partition_valid: profile.partition,
    })
}

/// `Σ_i l_i · E_i · w_i`.
pub fn expected_loss(
    state: &RiskState,
    profile: &UsageProfile,
    loss: &LossModel,
) -> Result<f64, RiskError> {
    check_len(profile.weights.len(), state.universe())?;
    check_len(loss.losses.len(), state.universe())?;
    Ok((0..state.universe())
        .map(|i| loss.losses[i] * state.no_bug_mean(i) * profile.weights[i])
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Prefer the higher no-bug belief.
    PreferConfident,
    /// Prefer the lower no-bug belief, weighted by loss when given.
    MaxRisk,
    /// Prefer the most uncertain index.
    MaxVariance,
}

/// Chooses which index to drive the next test towards. Never-visited
/// candidates come first under every policy; ties go to the lowest index.
pub fn select_target(
    state: &RiskState,
    candidates: &[usize],
    loss: Option<&LossModel>,
    policy: Policy,
) -> Result<usize, RiskError> {
    if candidates.is_empty() {
        return Err(RiskError::NoCandidates);
    }
    for &c in candidates {
        state.check(c)?;
    }
    if let Some(l) = loss {
        check_len(l.losses.len(), state.universe())?;
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&fresh) = sorted.iter().find(|&&c| state.hits(c) == 0) {
        return Ok(fresh);
    }
    let score = |i: usize| -> f64 {
        match policy {
            Policy::PreferConfident => state.no_bug_mean(i),
            Policy::MaxRisk => {
                let risk = 1.0 - state.no_bug_mean(i);
                loss.map_or(risk, |l| l.loss(i) * risk)
            }
            Policy::MaxVariance => state.variance(i),
        }
    };
    let mut best = sorted[0];
    for &c in &sorted[1..] {
        if score(c) > score(best) {
            best = c;
        }
    }
    Ok(best)
}

/// One replayed test outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub test_id: String,
    pub hits: Vec<usize>,
    pub passed: bool,
}

/// Replays `history` through a fresh state over `universe` indices and records
/// after each step the largest variance among indices whose total hit count
/// over the whole history is at least `min_coverage`.
pub fn max_variance_series(
    universe: usize,
    history: &[Observation],
    min_coverage: u64,
    convention: Convention,
) -> Result<Vec<f64>, RiskError> {
    if history.is_empty() {
        return Ok(Vec::new());
    }
    let mut totals = vec![0u64; universe];
    for obs in history {
        for &i in &obs.hits {
            if i >= universe {
                return Err(RiskError::UnknownIndex { index: i, universe });
            }
            totals[i] += 1;
        }
    }
    let tracked: Vec<usize> = (0..universe)
        .filter(|&i| totals[i] >= min_coverage)
        .collect();
    if tracked.is_empty() {
        return Err(RiskError::NoIndexQualifies(min_coverage));
    }
    let mut state = RiskState::new(universe, convention);
    let mut series = Vec::with_capacity(history.len());
    for obs in history {
        state.observe(&obs.hits, obs.passed)?;
        let max = tracked
            .iter()
            .map(|&i| state.variance(i))
            .fold(0.0, f64::max);
        series.push(max);
    }
    Ok(series)
}

/// Writes `test-id,index-list,passed` rows; index lists are `;`-separated.
pub fn history_to_csv(history: &[Observation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["test-id", "index-list", "passed"])
        .expect("in-memory write");
    for obs in history {
        let list: Vec<String> = obs.hits.iter().map(usize::to_string).collect();
        w.write_record([
            obs.test_id.as_str(),
            &list.join(";"),
            if obs.passed { "true" } else { "false" },
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

pub fn history_from_csv(text: &str) -> Result<Vec<Observation>, RiskError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| RiskError::History(e.to_string()))?;
        let bad = |m: &str| RiskError::History(format!("row {}: {m}", row + 1));
        if record.len() != 3 {
            return Err(bad("expected 3 columns"));
        }
        let hits = if record[1].trim().is_empty() {
            Vec::new()
        } else {
            record[1]
                .split(';')
                .map(|s| s.trim().parse::<usize>().map_err(|_| bad("bad index")))
                .collect::<Result<Vec<_>, _>>()?
        };
        let passed = match record[2].trim() {
            "true" | "1" => true,
            "false" | "0" => false,
            _ => return Err(bad("passed must be true or false")),
        };
        out.push(Observation {
            test_id: record[0].to_string(),
            hits,
            passed,
        });
    }
    Ok(out)
}
