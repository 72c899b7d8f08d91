//! Coverage-criterion families.
//!
//! A family is a finite, ordered index set together with a membership test:
//! index `i` is covered by a test `T` when `T` lies in the language `C(i)`.
//! Every built-in family evaluates membership directly from its definition
//! ([`CriterionFamily::matches`]) and has a faster bulk path that lists all
//! indices a test covers at once ([`CriterionFamily::covered_by`]). Emptiness
//! against a test model goes through a compiled automaton per index, except for
//! board symmetries, which enumerate the model's traces.

mod spec;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde_json::Value;
use thiserror::Error;

use crate::automaton::{self, Automaton, Feasibility};
use crate::model::{Alphabet, Event, ModelError, TestCase, TestModel};
use crate::regex::{self, PatternError};
use crate::tictactoe::{self, GameError};

pub use spec::{CriterionSpec, NamedPattern};

/// Upper limit on the size of an index set.
pub const MAX_INDICES: usize = 4_000_000;

/// Upper limit on traces visited when a family has no automaton form.
pub const ENUMERATION_LIMIT: usize = 2_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CriteriaError {
    #[error("tuple length t must satisfy 1 <= t (got {0})")]
    ZeroTuple(usize),
    #[error("tuple length t = {t} exceeds test length n = {n}")]
    TupleTooLong { t: usize, n: usize },
    #[error("index set too large ({0} indices)")]
    TooManyIndices(u128),
    #[error("{0} must not be empty")]
    EmptySet(&'static str),
    #[error("sets overlap on event `{0}` (R∩S must be empty)")]
    Overlap(String),
    #[error("duplicate index name `{0}`")]
    DuplicateName(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("unknown criterion index {0}")]
    UnknownIndex(String),
    #[error("family alphabet does not match the model alphabet")]
    AlphabetMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("criterion spec: {0}")]
    Spec(String),
}

/// One element of a family's index set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CriterionIndex {
    /// Event tuple `σ1..σt` (Kuhn–Higdon, exactly-once, consecutive window).
    Word(Vec<Event>),
    /// Position/letter constraints `(i1,σ1)..(it,σt)`, positions 1-based.
    Positional(Vec<(usize, Event)>),
    /// Ordered event pair: `(s, r)` for message order, `(d, a)` for transactions.
    Pair(Event, Event),
    /// Canonical move sequence of a board-game symmetry class.
    Symmetry(Vec<u8>),
    /// User-named custom criterion.
    Named(String),
    /// Block of a relaxed family.
    Block(Vec<CriterionIndex>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    ClassicTway,
    KuhnHigdon,
    ExactOnce,
    ConsecutiveWindow,
    MessageOrder,
    TransactionSafety,
    Symmetry,
    Relaxed,
    CustomRegular,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::ClassicTway => "classic-tway",
            FamilyKind::KuhnHigdon => "kuhn-higdon",
            FamilyKind::ExactOnce => "exact-once",
            FamilyKind::ConsecutiveWindow => "consecutive-window",
            FamilyKind::MessageOrder => "message-order",
            FamilyKind::TransactionSafety => "transaction-safety",
            FamilyKind::Symmetry => "symmetry",
            FamilyKind::Relaxed => "relaxed",
            FamilyKind::CustomRegular => "custom-regular",
        })
    }
}

#[derive(Debug, Clone)]
enum Matcher {
    ClassicTway {
        n: usize,
    },
    KuhnHigdon,
    ExactOnce,
    Consecutive,
    MessageOrder {
        sends: Vec<Event>,
    },
    Transaction {
        guarded: Vec<bool>,
    },
    Symmetry {
        n: usize,
    },
    Custom {
        automata: Vec<Automaton>,
    },
    Relaxed {
        base: Box<CriterionFamily>,
        blocks: Vec<Vec<usize>>,
        block_of: Vec<usize>,
    },
}

/// An indexed family `{C(i)}` of languages over an alphabet.
#[derive(Debug, Clone)]
pub struct CriterionFamily {
    id: String,
    kind: FamilyKind,
    alphabet: Alphabet,
    indices: Vec<CriterionIndex>,
    positions: HashMap<CriterionIndex, usize>,
    matcher: Matcher,
    tuple_len: usize,
    complete: bool,
}

fn checked_power(base: usize, exp: usize) -> Result<usize, CriteriaError> {
    let mut total: u128 = 1;
    for _ in 0..exp {
        total = total.saturating_mul(base as u128);
        if total > MAX_INDICES as u128 {
            return Err(CriteriaError::TooManyIndices(total));
        }
    }
    Ok(total as usize)
}

/// Decodes radix-`base` code `code` into a `len`-tuple of events.
fn decode_word(mut code: usize, base: usize, len: usize) -> Vec<Event> {
    let mut word = vec![Event(0); len];
    for slot in word.iter_mut().rev() {
        *slot = Event((code % base) as u16);
        code /= base;
    }
    word
}

fn encode_word(word: &[Event], base: usize) -> usize {
    word.iter().fold(0, |acc, e| acc * base + e.index())
}

fn is_subsequence(needle: &[Event], hay: &[Event]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|e| it.any(|h| h == e))
}

fn all_events_automaton_loop(a: &mut Automaton, state: usize, allowed: impl Fn(Event) -> bool) {
    for e in 0..a.event_count() {
        let e = Event(e as u16);
        if allowed(e) {
            a.add_transition(state, e, state);
        }
    }
}

impl CriterionFamily {
    fn assemble(
        id: String,
        kind: FamilyKind,
        alphabet: Alphabet,
        indices: Vec<CriterionIndex>,
        matcher: Matcher,
        tuple_len: usize,
    ) -> Self {
        let positions = indices
            .iter()
            .enumerate()
            .map(|(i, idx)| (idx.clone(), i))
            .collect();
        CriterionFamily {
            id,
            kind,
            alphabet,
            indices,
            positions,
            matcher,
            tuple_len,
            complete: false,
        }
    }

    fn words(
        alphabet: &Alphabet,
        t: usize,
        kind: FamilyKind,
        matcher: Matcher,
        id: &str,
    ) -> Result<Self, CriteriaError> {
        if t == 0 {
            return Err(CriteriaError::ZeroTuple(t));
        }
        let count = checked_power(alphabet.len(), t)?;
        let indices = (0..count)
            .map(|c| CriterionIndex::Word(decode_word(c, alphabet.len(), t)))
            .collect();
        Ok(Self::assemble(
            format!("{id}-{t}"),
            kind,
            alphabet.clone(),
            indices,
            matcher,
            t,
        ))
    }

    /// Classic t-way coverage of fixed-length tests: one index per choice of
    /// `t` increasing positions in `1..=n` and a letter for each.
    pub fn classic_tway(alphabet: &Alphabet, n: usize, t: usize) -> Result<Self, CriteriaError> {
        if t == 0 {
            return Err(CriteriaError::ZeroTuple(t));
        }
        if t > n {
            return Err(CriteriaError::TupleTooLong { t, n });
        }
        let letters = checked_power(alphabet.len(), t)?;
        let mut combos = Vec::new();
        let mut current = Vec::with_capacity(t);
        position_combos(1, n, t, &mut current, &mut combos);
        let total = combos.len() as u128 * letters as u128;
        if total > MAX_INDICES as u128 {
            return Err(CriteriaError::TooManyIndices(total));
        }
        let mut indices = Vec::with_capacity(total as usize);
        for combo in &combos {
            for code in 0..letters {
                let word = decode_word(code, alphabet.len(), t);
                indices.push(CriterionIndex::Positional(
                    combo.iter().copied().zip(word).collect(),
                ));
            }
        }
        Ok(Self::assemble(
            format!("classic-{n}-{t}"),
            FamilyKind::ClassicTway,
            alphabet.clone(),
            indices,
            Matcher::ClassicTway { n },
            t,
        ))
    }

    /// Kuhn–Higdon t-sequence coverage: `C(σ1..σt) = Σ* σ1 Σ* ... σt Σ*`.
    pub fn kuhn_higdon(alphabet: &Alphabet, t: usize) -> Result<Self, CriteriaError> {
        Self::words(
            alphabet,
            t,
            FamilyKind::KuhnHigdon,
            Matcher::KuhnHigdon,
            "kuhn-higdon",
        )
    }

    /// Like Kuhn–Higdon, but the tuple's letters may not appear anywhere else:
    /// `Σ'* σ1 Σ'* ... σt Σ'*` with `Σ' = Σ \ {σ1..σt}`.
    pub fn exact_once(alphabet: &Alphabet, t: usize) -> Result<Self, CriteriaError> {
        Self::words(
            alphabet,
            t,
            FamilyKind::ExactOnce,
            Matcher::ExactOnce,
            "exact-once",
        )
    }

    /// Contiguous windows: `C(w) = Σ* w Σ*`.
    pub fn consecutive_window(alphabet: &Alphabet, t: usize) -> Result<Self, CriteriaError> {
        Self::words(
            alphabet,
            t,
            FamilyKind::ConsecutiveWindow,
            Matcher::Consecutive,
            "consecutive",
        )
    }

    fn disjoint_pairs(
        alphabet: &Alphabet,
        left: &[Event],
        right: &[Event],
        names: (&'static str, &'static str),
    ) -> Result<Vec<CriterionIndex>, CriteriaError> {
        if left.is_empty() {
            return Err(CriteriaError::EmptySet(names.0));
        }
        if right.is_empty() {
            return Err(CriteriaError::EmptySet(names.1));
        }
        let l: BTreeSet<Event> = left.iter().copied().collect();
        let r: BTreeSet<Event> = right.iter().copied().collect();
        if let Some(e) = l.intersection(&r).next() {
            return Err(CriteriaError::Overlap(alphabet.name(*e).to_string()));
        }
        Ok(l.iter()
            .flat_map(|&a| r.iter().map(move |&b| CriterionIndex::Pair(a, b)))
            .collect())
    }

    /// Message order: `(s, r)` is covered when `s` occurs before `r`.
    pub fn message_order(
        alphabet: &Alphabet,
        sends: &[Event],
        receives: &[Event],
    ) -> Result<Self, CriteriaError> {
        let indices = Self::disjoint_pairs(alphabet, sends, receives, ("sends", "receives"))?;
        let sends: Vec<Event> = sends
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self::assemble(
            "message-order".into(),
            FamilyKind::MessageOrder,
            alphabet.clone(),
            indices,
            Matcher::MessageOrder { sends },
            2,
        ))
    }

    /// Transaction safety: exactly one debit `d` followed by exactly one
    /// credit `a`, with every other event outside `D ∪ A`.
    pub fn transaction_safety(
        alphabet: &Alphabet,
        debits: &[Event],
        credits: &[Event],
    ) -> Result<Self, CriteriaError> {
        let indices = Self::disjoint_pairs(alphabet, debits, credits, ("debits", "credits"))?;
        let mut guarded = vec![false; alphabet.len()];
        for e in debits.iter().chain(credits) {
            guarded[e.index()] = true;
        }
        Ok(Self::assemble(
            "transaction-safety".into(),
            FamilyKind::TransactionSafety,
            alphabet.clone(),
            indices,
            Matcher::Transaction { guarded },
            2,
        ))
    }

    /// Symmetry classes of complete games on an `n × n` board. The alphabet is
    /// the cell numbers `"1".."n²"`.
    pub fn symmetry_classes(n: usize) -> Result<Self, CriteriaError> {
        let alphabet = Alphabet::new((1..=n * n).map(|c| c.to_string()))?;
        let indices = tictactoe::game_classes(n)?
            .into_iter()
            .map(CriterionIndex::Symmetry)
            .collect();
        Ok(Self::assemble(
            format!("symmetry-{n}"),
            FamilyKind::Symmetry,
            alphabet,
            indices,
            Matcher::Symmetry { n },
            n * n,
        ))
    }

    /// One index per named anchored regular expression.
    pub fn custom_regular(
        alphabet: &Alphabet,
        patterns: &[NamedPattern],
    ) -> Result<Self, CriteriaError> {
        if patterns.is_empty() {
            return Err(CriteriaError::EmptySet("indices"));
        }
        let mut names = HashSet::new();
        let mut automata = Vec::with_capacity(patterns.len());
        let mut indices = Vec::with_capacity(patterns.len());
        for p in patterns {
            if !names.insert(p.name.clone()) {
                return Err(CriteriaError::DuplicateName(p.name.clone()));
            }
            automata.push(regex::compile(&p.pattern, alphabet)?);
            indices.push(CriterionIndex::Named(p.name.clone()));
        }
        Ok(Self::assemble(
            "custom".into(),
            FamilyKind::CustomRegular,
            alphabet.clone(),
            indices,
            Matcher::Custom { automata },
            1,
        ))
    }

    /// Coarsens the family: one index per partition block, covered when any
    /// member is covered.
    pub fn relax(&self, partition: &IndexPartition) -> Result<Self, CriteriaError> {
        if partition.universe != self.indices.len() || partition.family_id != self.id {
            return Err(CriteriaError::Partition(
                "partition was built for a different family".into(),
            ));
        }
        let mut block_of = vec![0; self.indices.len()];
        for (b, block) in partition.blocks.iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        let indices = partition
            .blocks
            .iter()
            .map(|block| {
                CriterionIndex::Block(block.iter().map(|&i| self.indices[i].clone()).collect())
            })
            .collect();
        Ok(Self::assemble(
            format!("relaxed({})", self.id),
            FamilyKind::Relaxed,
            self.alphabet.clone(),
            indices,
            Matcher::Relaxed {
                base: Box::new(self.clone()),
                blocks: partition.blocks.clone(),
                block_of,
            },
            self.tuple_len,
        ))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[CriterionIndex] {
        &self.indices
    }

    pub fn index(&self, position: usize) -> &CriterionIndex {
        &self.indices[position]
    }

    pub fn position(&self, index: &CriterionIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Length of the tuples indexing the family, 1 where that is meaningless.
    pub fn tuple_len(&self) -> usize {
        self.tuple_len
    }

    /// Whether the family claims `∪ C(i) = Σ^a`. Built-ins never do; the
    /// complement requirement is left implicit.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn with_complete(mut self, complete: bool) -> Self {
        self.complete = complete;
        self
    }

    /// Membership of `test` in `C(i)`, evaluated from the definition.
    pub fn matches(&self, position: usize, test: &TestCase) -> bool {
        let t = test.events();
        match (&self.matcher, &self.indices[position]) {
            (Matcher::KuhnHigdon, CriterionIndex::Word(w)) => is_subsequence(w, t),
            (Matcher::Consecutive, CriterionIndex::Word(w)) => {
                t.windows(w.len()).any(|x| x == w.as_slice())
            }
            (Matcher::ExactOnce, CriterionIndex::Word(w)) => {
                let letters: HashSet<Event> = w.iter().copied().collect();
                t.iter().filter(|e| letters.contains(e)).eq(w.iter())
            }
            (Matcher::ClassicTway { n }, CriterionIndex::Positional(cs)) => {
                t.len() == *n && cs.iter().all(|&(p, e)| t[p - 1] == e)
            }
            (Matcher::MessageOrder { .. }, CriterionIndex::Pair(s, r)) => t
                .iter()
                .position(|e| e == s)
                .is_some_and(|i| t[i + 1..].contains(r)),
            (Matcher::Transaction { guarded }, CriterionIndex::Pair(d, a)) => {
                t.iter().filter(|e| guarded[e.index()]).eq([d, a])
            }
            (Matcher::Symmetry { n }, CriterionIndex::Symmetry(w)) => {
                cells(t).is_some_and(|play| tictactoe::canonical(&play, *n).is_ok_and(|c| &c == w))
            }
            (Matcher::Custom { automata }, _) => automata[position].accepts(t),
            (Matcher::Relaxed { base, blocks, .. }, _) => {
                blocks[position].iter().any(|&i| base.matches(i, test))
            }
            _ => unreachable!("index variant does not belong to this family"),
        }
    }

    /// Membership for an index given by value.
    pub fn matches_index(
        &self,
        index: &CriterionIndex,
        test: &TestCase,
    ) -> Result<bool, CriteriaError> {
        let pos = self
            .position(index)
            .ok_or_else(|| CriteriaError::UnknownIndex(format!("{index:?}")))?;
        Ok(self.matches(pos, test))
    }

    /// Positions of all indices covered by `test`, ascending.
    pub fn covered_by(&self, test: &TestCase) -> Vec<usize> {
        let t = test.events();
        let base = self.alphabet.len();
        let mut out: Vec<usize> = match &self.matcher {
            Matcher::KuhnHigdon => subsequence_codes(t, self.tuple_len, base),
            Matcher::Consecutive => {
                let mut v: Vec<usize> = t
                    .windows(self.tuple_len)
                    .map(|w| encode_word(w, base))
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            Matcher::ExactOnce => exact_once_codes(t, self.tuple_len, base),
            Matcher::ClassicTway { n } => {
                if t.len() != *n {
                    Vec::new()
                } else {
                    let mut combos = Vec::new();
                    position_combos(1, *n, self.tuple_len, &mut Vec::new(), &mut combos);
                    combos
                        .iter()
                        .filter_map(|combo| {
                            let idx = CriterionIndex::Positional(
                                combo.iter().map(|&p| (p, t[p - 1])).collect(),
                            );
                            self.position(&idx)
                        })
                        .collect()
                }
            }
            Matcher::MessageOrder { sends } => {
                let mut seen_before = vec![false; base];
                let mut hits = Vec::new();
                for &e in t {
                    for s in sends.iter().filter(|s| seen_before[s.index()]) {
                        if let Some(p) = self.position(&CriterionIndex::Pair(*s, e)) {
                            hits.push(p);
                        }
                    }
                    seen_before[e.index()] = true;
                }
                hits.sort_unstable();
                hits.dedup();
                hits
            }
            Matcher::Transaction { guarded } => {
                let g: Vec<Event> = t.iter().copied().filter(|e| guarded[e.index()]).collect();
                match g.as_slice() {
                    [d, a] => self
                        .position(&CriterionIndex::Pair(*d, *a))
                        .into_iter()
                        .collect(),
                    _ => Vec::new(),
                }
            }
            Matcher::Symmetry { n } => cells(t)
                .and_then(|play| tictactoe::canonical(&play, *n).ok())
                .and_then(|c| self.position(&CriterionIndex::Symmetry(c)))
                .into_iter()
                .collect(),
            Matcher::Custom { automata } => (0..automata.len())
                .filter(|&i| automata[i].accepts(t))
                .collect(),
            Matcher::Relaxed { base, block_of, .. } => {
                let mut v: Vec<usize> = base
                    .covered_by(test)
                    .into_iter()
                    .map(|i| block_of[i])
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        out.sort_unstable();
        out
    }

    /// Automaton accepting exactly `C(i)`, when the family has one.
    pub fn automaton(&self, position: usize) -> Option<Automaton> {
        let k = self.alphabet.len();
        let mut a = Automaton::new(k);
        match (&self.matcher, &self.indices[position]) {
            (Matcher::KuhnHigdon, CriterionIndex::Word(w))
            | (Matcher::Consecutive, CriterionIndex::Word(w)) => {
                let gaps = matches!(self.matcher, Matcher::KuhnHigdon);
                let states: Vec<usize> = (0..=w.len()).map(|i| a.add_state(i == w.len())).collect();
                a.add_start(states[0]);
                for (i, &e) in w.iter().enumerate() {
                    a.add_transition(states[i], e, states[i + 1]);
                }
                all_events_automaton_loop(&mut a, states[0], |_| true);
                all_events_automaton_loop(&mut a, states[w.len()], |_| true);
                if gaps {
                    for &s in &states[1..w.len()] {
                        all_events_automaton_loop(&mut a, s, |_| true);
                    }
                }
            }
            (Matcher::ExactOnce, CriterionIndex::Word(w)) => {
                let letters: HashSet<Event> = w.iter().copied().collect();
                let states: Vec<usize> = (0..=w.len()).map(|i| a.add_state(i == w.len())).collect();
                a.add_start(states[0]);
                for (i, &e) in w.iter().enumerate() {
                    a.add_transition(states[i], e, states[i + 1]);
                }
                for &s in &states {
                    all_events_automaton_loop(&mut a, s, |e| !letters.contains(&e));
                }
            }
            (Matcher::ClassicTway { n }, CriterionIndex::Positional(cs)) => {
                let states: Vec<usize> = (0..=*n).map(|i| a.add_state(i == *n)).collect();
                a.add_start(states[0]);
                for p in 1..=*n {
                    match cs.iter().find(|(q, _)| *q == p) {
                        Some(&(_, e)) => a.add_transition(states[p - 1], e, states[p]),
                        None => {
                            for e in 0..k {
                                a.add_transition(states[p - 1], Event(e as u16), states[p]);
                            }
                        }
                    }
                }
            }
            (Matcher::MessageOrder { .. }, CriterionIndex::Pair(s, r)) => {
                let q: Vec<usize> = (0..3).map(|i| a.add_state(i == 2)).collect();
                a.add_start(q[0]);
                for &x in &q {
                    all_events_automaton_loop(&mut a, x, |_| true);
                }
                a.add_transition(q[0], *s, q[1]);
                a.add_transition(q[1], *r, q[2]);
            }
            (Matcher::Transaction { guarded }, CriterionIndex::Pair(d, c)) => {
                let q: Vec<usize> = (0..3).map(|i| a.add_state(i == 2)).collect();
                a.add_start(q[0]);
                for &x in &q {
                    all_events_automaton_loop(&mut a, x, |e| !guarded[e.index()]);
                }
                a.add_transition(q[0], *d, q[1]);
                a.add_transition(q[1], *c, q[2]);
            }
            (Matcher::Custom { automata }, _) => return Some(automata[position].clone()),
            (Matcher::Relaxed { base, blocks, .. }, _) => {
                let parts: Option<Vec<Automaton>> = blocks[position]
                    .iter()
                    .map(|&i| base.automaton(i))
                    .collect();
                return parts.map(|p| Automaton::union(k, &p));
            }
            (Matcher::Symmetry { .. }, _) => return None,
            _ => unreachable!("index variant does not belong to this family"),
        }
        Some(a)
    }

    /// Default length cap for emptiness checks on unbounded cyclic models.
    pub fn default_len_cap(&self, model: &TestModel) -> usize {
        2 * model.state_count() * self.tuple_len.max(1)
    }

    fn resolve_cap(&self, model: &TestModel, len_cap: Option<usize>) -> Option<usize> {
        match len_cap {
            Some(c) => Some(c),
            None if model.length_bound().is_none() && model.is_cyclic() => {
                Some(self.default_len_cap(model))
            }
            None => None,
        }
    }

    /// Decides `C(i) ∩ P ≠ ∅` for one index.
    pub fn intersects_model(
        &self,
        position: usize,
        model: &TestModel,
        len_cap: Option<usize>,
    ) -> Result<Feasibility, CriteriaError> {
        if model.alphabet() != &self.alphabet {
            return Err(CriteriaError::AlphabetMismatch);
        }
        let cap = self.resolve_cap(model, len_cap);
        Ok(match self.automaton(position) {
            Some(a) => automaton::intersects(model, &a, cap),
            None => {
                let (hit, capped) = self.enumerated_hits(model, cap);
                Feasibility {
                    feasible: hit[position],
                    capped: capped && !hit[position],
                }
            }
        })
    }

    /// Feasibility of every index, plus whether any answer was capped.
    pub fn feasible_indices(
        &self,
        model: &TestModel,
        len_cap: Option<usize>,
    ) -> Result<(Vec<bool>, bool), CriteriaError> {
        if model.alphabet() != &self.alphabet {
            return Err(CriteriaError::AlphabetMismatch);
        }
        let cap = self.resolve_cap(model, len_cap);
        if self.automaton(0).is_none() {
            let (hit, capped) = self.enumerated_hits(model, cap);
            let any_capped = capped && hit.iter().any(|h| !h);
            return Ok((hit, any_capped));
        }
        let results: Vec<Feasibility> = (0..self.indices.len())
            .into_par_iter()
            .map(|i| automaton::intersects(model, &self.automaton(i).expect("automaton form"), cap))
            .collect();
        let capped = results.iter().any(|f| f.capped);
        Ok((results.into_iter().map(|f| f.feasible).collect(), capped))
    }

    /// Enumerates accepted model traces up to `cap` (or the model bound) and
    /// marks every index they cover.
    fn enumerated_hits(&self, model: &TestModel, cap: Option<usize>) -> (Vec<bool>, bool) {
        let limit = match (model.length_bound(), cap) {
            (Some(b), Some(c)) => b.min(c),
            (Some(b), None) => b,
            (None, Some(c)) => c,
            (None, None) => usize::MAX,
        };
        let mut hit = vec![false; self.indices.len()];
        let mut truncated = false;
        let mut visited = 0usize;
        let mut path = Vec::new();
        let mut stack = vec![(model.initial(), 0usize)];
        // explicit DFS over (state, next-edge) frames
        while let Some(&mut (s, ref mut next)) = stack.last_mut() {
            if *next == 0 && model.is_accepting(s) {
                for i in self.covered_by(&TestCase::new(path.clone())) {
                    hit[i] = true;
                }
                visited += 1;
                if visited >= ENUMERATION_LIMIT {
                    truncated = true;
                    break;
                }
            }
            let out = model.outgoing(s);
            if *next < out.len() {
                let (e, to) = out[*next];
                *next += 1;
                if path.len() >= limit {
                    truncated = true;
                    continue;
                }
                path.push(e);
                stack.push((to, 0));
            } else {
                stack.pop();
                path.pop();
            }
        }
        let artificial = cap.is_some_and(|c| model.length_bound().is_none_or(|b| c < b));
        (
            hit,
            truncated && (artificial || visited >= ENUMERATION_LIMIT),
        )
    }

    /// Human-readable label of index `i`, stable across runs.
    pub fn label(&self, position: usize) -> String {
        self.label_of(&self.indices[position])
    }

    fn label_of(&self, index: &CriterionIndex) -> String {
        let name = |e: &Event| self.alphabet.name(*e).to_string();
        match index {
            CriterionIndex::Word(w) => {
                format!("({})", w.iter().map(name).collect::<Vec<_>>().join(","))
            }
            CriterionIndex::Pair(a, b) => format!("({},{})", name(a), name(b)),
            CriterionIndex::Positional(cs) => format!(
                "({})",
                cs.iter()
                    .map(|(p, e)| format!("({p},{})", name(e)))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            CriterionIndex::Symmetry(w) => format!(
                "[{}]",
                w.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            CriterionIndex::Named(n) => n.clone(),
            CriterionIndex::Block(members) => match &self.matcher {
                Matcher::Relaxed { base, .. } => format!(
                    "{{{}}}",
                    members
                        .iter()
                        .map(|m| base.label_of(m))
                        .collect::<Vec<_>>()
                        .join("|")
                ),
                _ => unreachable!(),
            },
        }
    }

    /// Position of the index whose [`label`](Self::label) is `label`.
    pub fn find_label(&self, label: &str) -> Option<usize> {
        (0..self.indices.len()).find(|&i| self.label(i) == label)
    }

    /// Label → position table, for bulk lookups.
    pub fn label_table(&self) -> HashMap<String, usize> {
        (0..self.indices.len())
            .map(|i| (self.label(i), i))
            .collect()
    }

    /// Reads an index from its JSON form: `["a","b"]` for tuples and pairs,
    /// `[[1,"a"],[2,"b"]]` for positional indices, `[1,5,9]` for symmetry
    /// classes and `"name"` for custom criteria.
    pub fn parse_index(&self, value: &Value) -> Result<CriterionIndex, CriteriaError> {
        let bad = || CriteriaError::UnknownIndex(value.to_string());
        let event = |v: &Value| -> Result<Event, CriteriaError> {
            let name = v.as_str().ok_or_else(bad)?;
            Ok(self.alphabet.event(name)?)
        };
        let index = match self.kind {
            FamilyKind::KuhnHigdon | FamilyKind::ExactOnce | FamilyKind::ConsecutiveWindow => {
                let arr = value.as_array().ok_or_else(bad)?;
                CriterionIndex::Word(arr.iter().map(event).collect::<Result<_, _>>()?)
            }
            FamilyKind::MessageOrder | FamilyKind::TransactionSafety => {
                match value.as_array().map(Vec::as_slice) {
                    Some([a, b]) => CriterionIndex::Pair(event(a)?, event(b)?),
                    _ => return Err(bad()),
                }
            }
            FamilyKind::ClassicTway => {
                let arr = value.as_array().ok_or_else(bad)?;
                let mut cs = Vec::new();
                for item in arr {
                    match item.as_array().map(Vec::as_slice) {
                        Some([p, e]) => cs.push((p.as_u64().ok_or_else(bad)? as usize, event(e)?)),
                        _ => return Err(bad()),
                    }
                }
                CriterionIndex::Positional(cs)
            }
            FamilyKind::Symmetry => {
                let arr = value.as_array().ok_or_else(bad)?;
                CriterionIndex::Symmetry(
                    arr.iter()
                        .map(|v| v.as_u64().map(|c| c as u8).ok_or_else(bad))
                        .collect::<Result<_, _>>()?,
                )
            }
            FamilyKind::CustomRegular => {
                CriterionIndex::Named(value.as_str().ok_or_else(bad)?.to_string())
            }
            FamilyKind::Relaxed => {
                let arr = value.as_array().ok_or_else(bad)?;
                let Matcher::Relaxed { base, .. } = &self.matcher else {
                    unreachable!()
                };
                CriterionIndex::Block(
                    arr.iter()
                        .map(|v| base.parse_index(v))
                        .collect::<Result<_, _>>()?,
                )
            }
        };
        if self.position(&index).is_none() {
            return Err(bad());
        }
        Ok(index)
    }
}

fn cells(t: &[Event]) -> Option<Vec<u8>> {
    t.iter().map(|e| u8::try_from(e.index() + 1).ok()).collect()
}

fn position_combos(
    start: usize,
    n: usize,
    t: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == t {
        out.push(current.clone());
        return;
    }
    for p in start..=n {
        if n - p + 1 < t - current.len() {
            break;
        }
        current.push(p);
        position_combos(p + 1, n, t, current, out);
        current.pop();
    }
}

/// Radix codes of all distinct length-`t` subsequences of `t_events`.
fn subsequence_codes(events: &[Event], t: usize, base: usize) -> Vec<usize> {
    // layers[k] holds the codes of distinct length-k subsequences seen so far
    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); t + 1];
    let mut present: Vec<HashSet<usize>> = vec![HashSet::new(); t + 1];
    layers[0].push(0);
    present[0].insert(0);
    for &e in events {
        for k in (0..t).rev() {
            let fresh: Vec<usize> = layers[k]
                .iter()
                .map(|&c| c * base + e.index())
                .filter(|c| !present[k + 1].contains(c))
                .collect();
            for c in fresh {
                present[k + 1].insert(c);
                layers[k + 1].push(c);
            }
        }
    }
    let mut out = std::mem::take(&mut layers[t]);
    out.sort_unstable();
    out
}

/// Codes of tuples `w` such that the restriction of `events` to the letters
/// of `w` is exactly `w`.
fn exact_once_codes(events: &[Event], t: usize, base: usize) -> Vec<usize> {
    let mut letters: Vec<Event> = events.to_vec();
    letters.sort_unstable();
    letters.dedup();
    let mut out = Vec::new();
    let m = letters.len();
    if m > 20 {
        // too many letters for subset enumeration; fall back to per-letter-set scan
        return exact_once_codes_slow(events, t, base);
    }
    for mask in 1u32..(1u32 << m) {
        if (mask.count_ones() as usize) > t {
            continue;
        }
        let set: Vec<bool> = {
            let mut s = vec![false; base];
            for (i, l) in letters.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s[l.index()] = true;
                }
            }
            s
        };
        let restricted: Vec<Event> = events.iter().copied().filter(|e| set[e.index()]).collect();
        if restricted.len() == t {
            out.push(encode_word(&restricted, base));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn exact_once_codes_slow(events: &[Event], t: usize, base: usize) -> Vec<usize> {
    let total = base.pow(t as u32);
    (0..total)
        .filter(|&c| {
            let w = decode_word(c, base, t);
            let letters: HashSet<Event> = w.iter().copied().collect();
            events.iter().filter(|e| letters.contains(e)).eq(w.iter())
        })
        .collect()
}

/// Disjoint, exhaustive blocks over a family's index positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    family_id: String,
    universe: usize,
    blocks: Vec<Vec<usize>>,
}

impl IndexPartition {
    pub fn new(
        family: &CriterionFamily,
        blocks: Vec<Vec<CriterionIndex>>,
    ) -> Result<Self, CriteriaError> {
        let positions = blocks
            .into_iter()
            .map(|b| {
                b.iter()
                    .map(|i| {
                        family
                            .position(i)
                            .ok_or_else(|| CriteriaError::UnknownIndex(format!("{i:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_positions(family, positions)
    }

    pub fn from_positions(
        family: &CriterionFamily,
        blocks: Vec<Vec<usize>>,
    ) -> Result<Self, CriteriaError> {
        let mut owner = vec![None; family.len()];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(CriteriaError::Partition(format!("block {b} is empty")));
            }
            for &i in block {
                if i >= family.len() {
                    return Err(CriteriaError::Partition(format!(
                        "position {i} out of range"
                    )));
                }
                if let Some(prev) = owner[i].replace(b) {
                    return Err(CriteriaError::Partition(format!(
                        "index {} appears in blocks {prev} and {b}",
                        family.label(i)
                    )));
                }
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(CriteriaError::Partition(format!(
                "index {} is not in any block",
                family.label(i)
            )));
        }
        Ok(IndexPartition {
            family_id: family.id.clone(),
            universe: family.len(),
            blocks,
        })
    }

    pub fn singletons(family: &CriterionFamily) -> Self {
        Self::from_positions(family, (0..family.len()).map(|i| vec![i]).collect()).expect("valid")
    }

    pub fn whole(family: &CriterionFamily) -> Self {
        Self::from_positions(family, vec![(0..family.len()).collect()]).expect("valid")
    }

    /// Groups indices by a key, blocks ordered by first appearance.
    pub fn group_by<K: Eq + std::hash::Hash>(
        family: &CriterionFamily,
        key: impl Fn(&CriterionIndex) -> K,
    ) -> Self {
        let mut order: HashMap<K, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, idx) in family.indices().iter().enumerate() {
            let next = order.len();
            let b = *order.entry(key(idx)).or_insert(next);
            if b == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[b].push(i);
        }
        Self::from_positions(family, blocks).expect("grouping is a partition")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}
