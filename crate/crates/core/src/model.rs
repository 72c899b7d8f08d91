//! Test models: finite labeled transition systems over an event alphabet.
//!
//! A [`TestModel`] defines the set of valid test sequences: every path from the
//! initial state that ends in an accepting state (and respects the optional
//! length bound) is a valid test. Pools of valid tests are drawn from it with
//! seeded random walks.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeded_rng;

/// Number of extra attempts a single requested walk gets when it fails to end
/// in an accepting state.
pub const WALK_RETRIES: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("no accepting trace found within retry budget (max_len = {max_len})")]
    RetryBudgetExhausted { max_len: usize },
    #[error("{0} must be at least 1")]
    ZeroArgument(&'static str),
    #[error("pool file line {line}: {message}")]
    PoolFormat { line: usize, message: String },
}

/// Position of an event inside its [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event(pub u16);

impl Event {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered set of distinct event names. The order fixes the `Event` numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    lookup: HashMap<String, Event>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(ModelError::Invalid(
                "alphabet must contain at least one event".into(),
            ));
        }
        if names.len() > u16::MAX as usize {
            return Err(ModelError::Invalid("alphabet too large".into()));
        }
        let mut lookup = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(ModelError::Invalid("event names must be non-empty".into()));
            }
            if name.contains(',') || name.chars().any(char::is_whitespace) {
                return Err(ModelError::Invalid(format!(
                    "event name `{name}` may not contain commas or whitespace"
                )));
            }
            if lookup.insert(name.clone(), Event(i as u16)).is_some() {
                return Err(ModelError::Invalid(format!("duplicate event `{name}`")));
            }
        }
        Ok(Alphabet { names, lookup })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, event: Event) -> &str {
        &self.names[event.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn event(&self, name: &str) -> Result<Event, ModelError> {
        self.lookup
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownEvent(name.to_string()))
    }

    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        (0..self.names.len()).map(|i| Event(i as u16))
    }
}

/// One test: a finite sequence of events.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TestCase(Vec<Event>);

impl TestCase {
    pub fn new(events: Vec<Event>) -> Self {
        TestCase(events)
    }

    pub fn from_names<S: AsRef<str>>(alphabet: &Alphabet, names: &[S]) -> Result<Self, ModelError> {
        names
            .iter()
            .map(|n| alphabet.event(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()
            .map(TestCase)
    }

    pub fn events(&self) -> &[Event] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names<'a>(&self, alphabet: &'a Alphabet) -> Vec<&'a str> {
        self.0.iter().map(|&e| alphabet.name(e)).collect()
    }

    /// Comma-joined event names, the line format of pool files.
    pub fn to_line(&self, alphabet: &Alphabet) -> String {
        self.names(alphabet).join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    pub event: Event,
    pub to: usize,
}

/// Finite labeled transition system defining the valid tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestModel {
    alphabet: Alphabet,
    states: Vec<String>,
    initial: usize,
    accepting: Vec<bool>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<(Event, usize)>>,
    length_bound: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: String,
    accepting: Vec<String>,
    transitions: Vec<TransitionRecord>,
    length_bound: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct TransitionRecord {
    from: String,
    event: String,
    to: String,
}

impl TestModel {
    /// Builds and validates a model from named parts.
    pub fn from_parts<S: AsRef<str>>(
        alphabet: Alphabet,
        states: &[S],
        initial: &str,
        accepting: &[S],
        transitions: &[(S, S, S)],
        length_bound: Option<usize>,
    ) -> Result<Self, ModelError> {
        let states: Vec<String> = states.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.as_str(), i).is_some() {
                return Err(ModelError::Invalid(format!("duplicate state `{s}`")));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| ModelError::Invalid(format!("undeclared state `{name}`")))
        };
        let initial = lookup(initial)?;
        let mut accepting_flags = vec![false; states.len()];
        for s in accepting {
            accepting_flags[lookup(s.as_ref())?] = true;
        }
        let mut edges = Vec::with_capacity(transitions.len());
        let mut seen = HashSet::new();
        for (from, event, to) in transitions {
            let event = alphabet.event(event.as_ref()).map_err(|_| {
                ModelError::Invalid(format!(
                    "transition {} --{}--> {} uses undeclared event `{}`",
                    from.as_ref(),
                    event.as_ref(),
                    to.as_ref(),
                    event.as_ref()
                ))
            })?;
            let t = Transition {
                from: lookup(from.as_ref())?,
                event,
                to: lookup(to.as_ref())?,
            };
            if seen.insert((t.from, t.event, t.to)) {
                edges.push(t);
            }
        }
        Self::build(
            alphabet,
            states,
            initial,
            accepting_flags,
            edges,
            length_bound,
        )
    }

    fn build(
        alphabet: Alphabet,
        states: Vec<String>,
        initial: usize,
        accepting: Vec<bool>,
        transitions: Vec<Transition>,
        length_bound: Option<usize>,
    ) -> Result<Self, ModelError> {
        let mut outgoing = vec![Vec::new(); states.len()];
        for t in &transitions {
            outgoing[t.from].push((t.event, t.to));
        }
        let mut reached = vec![false; states.len()];
        reached[initial] = true;
        let mut stack = vec![initial];
        while let Some(s) = stack.pop() {
            for &(_, to) in &outgoing[s] {
                if !reached[to] {
                    reached[to] = true;
                    stack.push(to);
                }
            }
        }
        if let Some(s) = reached.iter().position(|r| !r) {
            return Err(ModelError::Invalid(format!(
                "state `{}` is unreachable from the initial state",
                states[s]
            )));
        }
        Ok(TestModel {
            alphabet,
            states,
            initial,
            accepting,
            transitions,
            outgoing,
            length_bound,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.states[state]
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, state: usize) -> &[(Event, usize)] {
        &self.outgoing[state]
    }

    /// Maximum trace length, `None` when unbounded.
    pub fn length_bound(&self) -> Option<usize> {
        self.length_bound
    }

    /// Clamps a requested length to the model's own bound.
    pub fn effective_len(&self, requested: usize) -> usize {
        self.length_bound.map_or(requested, |b| b.min(requested))
    }

    /// True when the transition graph has a cycle reachable from the initial state.
    pub fn is_cyclic(&self) -> bool {
        // iterative DFS with colors
        let n = self.states.len();
        let mut color = vec![0u8; n];
        let mut stack: Vec<(usize, usize)> = vec![(self.initial, 0)];
        color[self.initial] = 1;
        while let Some(&mut (s, ref mut next)) = stack.last_mut() {
            if let Some(&(_, to)) = self.outgoing[s].get(*next) {
                *next += 1;
                match color[to] {
                    0 => {
                        color[to] = 1;
                        stack.push((to, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                color[s] = 2;
                stack.pop();
            }
        }
        false
    }

    /// Membership in the model's language.
    pub fn accepts(&self, test: &TestCase) -> bool {
        if self.length_bound.is_some_and(|b| test.len() > b) {
            return false;
        }
        let mut current: BTreeSet<usize> = BTreeSet::from([self.initial]);
        for &e in test.events() {
            current = current
                .iter()
                .flat_map(|&s| self.outgoing[s].iter().filter(move |(ev, _)| *ev == e))
                .map(|&(_, to)| to)
                .collect();
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|&s| self.accepting[s])
    }

    /// Parses and validates the JSON model format.
    pub fn load(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let alphabet = Alphabet::new(file.alphabet)?;
        let transitions: Vec<(String, String, String)> = file
            .transitions
            .into_iter()
            .map(|t| (t.from, t.event, t.to))
            .collect();
        TestModel::from_parts(
            alphabet,
            &file.states,
            &file.initial,
            &file.accepting,
            &transitions,
            file.length_bound,
        )
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            alphabet: self.alphabet.names.clone(),
            states: self.states.clone(),
            initial: self.states[self.initial].clone(),
            accepting: (0..self.states.len())
                .filter(|&s| self.accepting[s])
                .map(|s| self.states[s].clone())
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionRecord {
                    from: self.states[t.from].clone(),
                    event: self.alphabet.name(t.event).to_string(),
                    to: self.states[t.to].clone(),
                })
                .collect(),
            length_bound: self.length_bound,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    /// One walk attempt. `None` when the walk got stuck or ran out of length
    /// outside an accepting state.
    fn walk_once(&self, rng: &mut ChaCha8Rng, max_len: usize) -> Option<TestCase> {
        let mut state = self.initial;
        let mut events = Vec::new();
        loop {
            let out = &self.outgoing[state];
            if self.accepting[state] {
                if out.is_empty() || events.len() == max_len {
                    return Some(TestCase(events));
                }
                if rng.gen_range(0..out.len() + 1) == 0 {
                    return Some(TestCase(events));
                }
            } else if out.is_empty() || events.len() == max_len {
                return None;
            }
            let (event, to) = out[rng.gen_range(0..out.len())];
            events.push(event);
            state = to;
        }
    }

    /// Samples one accepted trace by a uniform random walk over transitions.
    ///
    /// At an accepting state with `d` outgoing transitions the walk stops with
    /// probability `1/(1+d)`. Walks that end elsewhere are retried up to
    /// [`WALK_RETRIES`] times.
    pub fn random_walk(
        &self,
        rng: &mut ChaCha8Rng,
        max_len: usize,
    ) -> Result<TestCase, ModelError> {
        self.random_walk_counted(rng, max_len).0
    }

    fn random_walk_counted(
        &self,
        rng: &mut ChaCha8Rng,
        max_len: usize,
    ) -> (Result<TestCase, ModelError>, usize) {
        if max_len == 0 {
            return (Err(ModelError::ZeroArgument("max_len")), 0);
        }
        let max_len = self.effective_len(max_len);
        for attempt in 0..=WALK_RETRIES {
            if let Some(t) = self.walk_once(rng, max_len) {
                return (Ok(t), attempt);
            }
        }
        (
            Err(ModelError::RetryBudgetExhausted { max_len }),
            WALK_RETRIES,
        )
    }

    /// Exact number of distinct non-empty accepted traces with length at most
    /// `max_len`.
    ///
    /// Works on the subset construction, so nondeterministic models count
    /// traces rather than paths.
    pub fn count_traces(&self, max_len: usize) -> BigUint {
        let max_len = self.effective_len(max_len);
        let mut memo: HashMap<(Vec<usize>, usize), BigUint> = HashMap::new();
        let with_empty = self.count_from(vec![self.initial], max_len, &mut memo);
        if self.accepting[self.initial] {
            with_empty - 1u8
        } else {
            with_empty
        }
    }

    fn count_from(
        &self,
        set: Vec<usize>,
        remaining: usize,
        memo: &mut HashMap<(Vec<usize>, usize), BigUint>,
    ) -> BigUint {
        let key = (set, remaining);
        if let Some(v) = memo.get(&key) {
            return v.clone();
        }
        let (set, _) = &key;
        let mut total = if set.iter().any(|&s| self.accepting[s]) {
            BigUint::from(1u8)
        } else {
            BigUint::from(0u8)
        };
        if remaining > 0 {
            let mut by_event: HashMap<Event, BTreeSet<usize>> = HashMap::new();
            for &s in set {
                for &(e, to) in &self.outgoing[s] {
                    by_event.entry(e).or_default().insert(to);
                }
            }
            let mut succ: Vec<_> = by_event.into_iter().collect();
            succ.sort();
            for (_, targets) in succ {
                total += self.count_from(targets.into_iter().collect(), remaining - 1, memo);
            }
        }
        memo.insert(key.clone(), total.clone());
        total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolStats {
    pub walks: usize,
    pub duplicates_discarded: usize,
    pub retries: usize,
    pub failed_walks: usize,
    pub seed: u64,
}

/// Distinct valid tests collected from random walks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestPool {
    cases: Vec<TestCase>,
    stats: PoolStats,
}

impl TestPool {
    /// Wraps already-distinct cases, e.g. ones read back from a pool file.
    pub fn from_cases(cases: Vec<TestCase>) -> Self {
        let mut seen = HashSet::new();
        let total = cases.len();
        let cases: Vec<TestCase> = cases
            .into_iter()
            .filter(|c| seen.insert(c.clone()))
            .collect();
        let stats = PoolStats {
            walks: 0,
            duplicates_discarded: total - cases.len(),
            retries: 0,
            failed_walks: 0,
            seed: 0,
        };
        TestPool { cases, stats }
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn stats(&self) -> &PoolStats {
        &self.stats
    }

    pub fn to_text(&self, alphabet: &Alphabet) -> String {
        let mut out = format!(
            "# walks={} distinct={} duplicates={} seed={}\n",
            self.stats.walks,
            self.cases.len(),
            self.stats.duplicates_discarded,
            self.stats.seed
        );
        for c in &self.cases {
            out.push_str(&c.to_line(alphabet));
            out.push('\n');
        }
        out
    }

    /// Reads a pool file. Blank lines are empty tests; `#` lines are comments.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, ModelError> {
        let mut cases = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            let case = if line.is_empty() {
                TestCase::default()
            } else {
                let names: Vec<&str> = line.split(',').map(str::trim).collect();
                TestCase::from_names(alphabet, &names).map_err(|e| ModelError::PoolFormat {
                    line: i + 1,
                    message: e.to_string(),
                })?
            };
            cases.push(case);
        }
        Ok(TestPool::from_cases(cases))
    }
}

/// Performs exactly `walk_count` walks and keeps the distinct results in
/// first-seen order. Walk `k` draws from a generator derived from `(seed, k)`,
/// so the result does not depend on how the walks are scheduled.
pub fn generate_pool(
    model: &TestModel,
    walk_count: usize,
    max_len: usize,
    seed: u64,
) -> Result<TestPool, ModelError> {
    if walk_count == 0 {
        return Err(ModelError::ZeroArgument("walk_count"));
    }
    if max_len == 0 {
        return Err(ModelError::ZeroArgument("max_len"));
    }
    let walks: Vec<(Result<TestCase, ModelError>, usize)> = (0..walk_count)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(seed, k as u64);
            model.random_walk_counted(&mut rng, max_len)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    let mut retries = 0;
    let mut failed = 0;
    let mut last_err = None;
    for (result, r) in walks {
        retries += r;
        match result {
            Ok(case) => {
                if seen.insert(case.clone()) {
                    cases.push(case);
                }
            }
            Err(e) => {
                failed += 1;
                last_err = Some(e);
            }
        }
    }
    if cases.is_empty() {
        return Err(last_err.unwrap_or(ModelError::RetryBudgetExhausted { max_len }));
    }
    let produced = walk_count - failed;
    let stats = PoolStats {
        walks: walk_count,
        duplicates_discarded: produced - cases.len(),
        retries,
        failed_walks: failed,
        seed,
    };
    Ok(TestPool { cases, stats })
}

impl fmt::Display for PoolStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "walks={} duplicates={} retries={} failed={} seed={}",
            self.walks, self.duplicates_discarded, self.retries, self.failed_walks, self.seed
        )
    }
}
