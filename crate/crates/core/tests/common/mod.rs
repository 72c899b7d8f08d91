#![allow(dead_code)]

pub mod regex_oracle;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seqcover::{Alphabet, Event, TestCase, TestModel};

pub const LETTERS: [&str; 4] = ["a", "b", "c", "d"];

pub fn alphabet(k: usize) -> Alphabet {
    Alphabet::new(LETTERS[..k].iter().copied()).unwrap()
}

/// Every word of length `0..=max_len` over `k` letters, shortest first.
pub fn all_words(k: usize, max_len: usize) -> Vec<TestCase> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Event>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for e in 0..k {
                let mut v = w.clone();
                v.push(Event(e as u16));
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out.into_iter().map(TestCase::new).collect()
}

/// A random model whose states are all reachable; possibly cyclic and
/// nondeterministic.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    k: usize,
    max_states: usize,
    length_bound: Option<usize>,
) -> TestModel {
    let n = rng.gen_range(1..=max_states);
    let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut transitions = Vec::new();
    for s in 1..n {
        let from = rng.gen_range(0..s);
        transitions.push((
            names[from].clone(),
            LETTERS[rng.gen_range(0..k)].to_string(),
            names[s].clone(),
        ));
    }
    for _ in 0..rng.gen_range(0..=2 * n) {
        transitions.push((
            names[rng.gen_range(0..n)].clone(),
            LETTERS[rng.gen_range(0..k)].to_string(),
            names[rng.gen_range(0..n)].clone(),
        ));
    }
    let mut accepting: Vec<String> = names
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .cloned()
        .collect();
    if accepting.is_empty() {
        accepting.push(names.choose(rng).unwrap().clone());
    }
    TestModel::from_parts(
        alphabet(k),
        &names,
        &names[0],
        &accepting,
        &transitions,
        length_bound,
    )
    .unwrap()
}

/// Accepted traces of length `0..=max_len`, by brute force over all words.
pub fn accepted_words(model: &TestModel, max_len: usize) -> Vec<TestCase> {
    all_words(model.alphabet().len(), max_len)
        .into_iter()
        .filter(|w| oracle_accepts(model, w))
        .collect()
}

/// Set-of-states simulation straight from the transition list.
pub fn oracle_accepts(model: &TestModel, word: &TestCase) -> bool {
    if model.length_bound().is_some_and(|b| word.len() > b) {
        return false;
    }
    let mut current = vec![model.initial()];
    for &e in word.events() {
        let mut next: Vec<usize> = model
            .transitions()
            .iter()
            .filter(|t| t.event == e && current.contains(&t.from))
            .map(|t| t.to)
            .collect();
        next.sort_unstable();
        next.dedup();
        current = next;
    }
    current.iter().any(|&s| model.is_accepting(s))
}
