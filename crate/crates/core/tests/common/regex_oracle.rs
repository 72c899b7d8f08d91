//! Independent regular-expression oracle built on the `regex` crate: one
//! character per event, one pattern per criterion index.

use std::collections::BTreeSet;

use regex::Regex;
use seqcover::{CriterionFamily, CriterionIndex, Event, TestCase};

use super::alphabet;

pub fn ch(e: Event) -> char {
    (b'a' + e.0 as u8) as char
}

pub fn text(t: &TestCase) -> String {
    t.events().iter().map(|&e| ch(e)).collect()
}

fn class(letters: impl IntoIterator<Item = Event>) -> String {
    let s: String = letters.into_iter().map(ch).collect();
    if s.is_empty() {
        // matches nothing; used only under `*`
        "[^a-z]".into()
    } else {
        format!("[{s}]")
    }
}

fn sigma(k: usize) -> Vec<Event> {
    (0..k).map(|e| Event(e as u16)).collect()
}

/// A regular expression over one character per event for index `i`.
pub fn oracle_pattern(
    family: &CriterionFamily,
    kind: &OracleKind,
    index: &CriterionIndex,
) -> String {
    let k = family.alphabet().len();
    let any = format!("{}*", class(sigma(k)));
    match (kind, index) {
        (OracleKind::Subsequence, CriterionIndex::Word(w)) => {
            let inner: Vec<String> = w.iter().map(|&e| ch(e).to_string()).collect();
            format!("^{any}{}{any}$", inner.join(&any))
        }
        (OracleKind::Window, CriterionIndex::Word(w)) => {
            let word: String = w.iter().map(|&e| ch(e)).collect();
            format!("^{any}{word}{any}$")
        }
        (OracleKind::ExactOnce, CriterionIndex::Word(w)) => {
            let rest = format!(
                "{}*",
                class(sigma(k).into_iter().filter(|e| !w.contains(e)))
            );
            let inner: Vec<String> = w.iter().map(|&e| ch(e).to_string()).collect();
            format!("^{rest}{}{rest}$", inner.join(&rest))
        }
        (OracleKind::Classic(n), CriterionIndex::Positional(cs)) => {
            let mut p = String::from("^");
            for pos in 1..=*n {
                match cs.iter().find(|(q, _)| *q == pos) {
                    Some(&(_, e)) => p.push(ch(e)),
                    None => p.push_str(&class(sigma(k))),
                }
            }
            p + "$"
        }
        (OracleKind::Order, CriterionIndex::Pair(s, r)) => {
            format!("^{any}{}{any}{}{any}$", ch(*s), ch(*r))
        }
        (OracleKind::Transaction(guarded), CriterionIndex::Pair(d, a)) => {
            let rest = format!(
                "{}*",
                class(sigma(k).into_iter().filter(|e| !guarded.contains(e)))
            );
            format!("^{rest}{}{rest}{}{rest}$", ch(*d), ch(*a))
        }
        (OracleKind::Relaxed(base), CriterionIndex::Block(members)) => {
            let alts: Vec<String> = members
                .iter()
                .map(|m| {
                    let p = oracle_pattern(family, base, m);
                    format!("(?:{})", &p[1..p.len() - 1])
                })
                .collect();
            format!("^(?:{})$", alts.join("|"))
        }
        (OracleKind::Custom(patterns), CriterionIndex::Named(name)) => {
            let p = &patterns.iter().find(|(n, _)| n == name).unwrap().1;
            format!("^(?:{p})$")
        }
        _ => panic!("oracle kind does not fit index {index:?}"),
    }
}

#[derive(Clone)]
pub enum OracleKind {
    Subsequence,
    Window,
    ExactOnce,
    Classic(usize),
    Order,
    Transaction(Vec<Event>),
    Relaxed(Box<OracleKind>),
    Custom(Vec<(String, String)>),
}

pub fn check_family(family: &CriterionFamily, kind: &OracleKind, words: &[TestCase]) {
    let regexes: Vec<Regex> = family
        .indices()
        .iter()
        .map(|i| Regex::new(&oracle_pattern(family, kind, i)).unwrap())
        .collect();
    for w in words {
        let s = text(w);
        let expected: Vec<usize> = (0..family.len())
            .filter(|&i| regexes[i].is_match(&s))
            .collect();
        for i in 0..family.len() {
            assert_eq!(
                family.matches(i, w),
                expected.contains(&i),
                "{} index {} on {s:?}",
                family.id(),
                family.label(i)
            );
        }
        assert_eq!(family.covered_by(w), expected, "{} on {s:?}", family.id());
    }
}

/// Non-empty subsets of `0..k` as bit masks.
pub fn subsets(k: usize) -> impl Iterator<Item = Vec<Event>> {
    (1u32..(1 << k)).map(move |m| {
        (0..k)
            .filter(|b| m & (1 << b) != 0)
            .map(|b| Event(b as u16))
            .collect()
    })
}

pub fn built_in_families(k: usize, t: usize) -> Vec<(CriterionFamily, OracleKind)> {
    let al = alphabet(k);
    let mut out = vec![
        (
            CriterionFamily::kuhn_higdon(&al, t).unwrap(),
            OracleKind::Subsequence,
        ),
        (
            CriterionFamily::consecutive_window(&al, t).unwrap(),
            OracleKind::Window,
        ),
        (
            CriterionFamily::exact_once(&al, t).unwrap(),
            OracleKind::ExactOnce,
        ),
    ];
    for n in t..=4 {
        out.push((
            CriterionFamily::classic_tway(&al, n, t).unwrap(),
            OracleKind::Classic(n),
        ));
    }
    if t == 2 {
        for s in subsets(k) {
            for r in subsets(k).filter(|r| r.iter().all(|e| !s.contains(e))) {
                out.push((
                    CriterionFamily::message_order(&al, &s, &r).unwrap(),
                    OracleKind::Order,
                ));
                let guarded: Vec<Event> = s.iter().chain(&r).copied().collect();
                out.push((
                    CriterionFamily::transaction_safety(&al, &s, &r).unwrap(),
                    OracleKind::Transaction(guarded),
                ));
            }
        }
    }
    out
}

/// Covered over feasible indices, evaluated directly on the enumerated
/// trace set `P`.
pub fn brute_ratio(family: &CriterionFamily, p: &[TestCase], suite: &[TestCase]) -> (usize, usize) {
    let feasible: BTreeSet<usize> = (0..family.len())
        .filter(|&i| p.iter().any(|w| family.matches(i, w)))
        .collect();
    let covered = feasible
        .iter()
        .filter(|&&i| suite.iter().any(|w| family.matches(i, w)))
        .count();
    (covered, feasible.len())
}
