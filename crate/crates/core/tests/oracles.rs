//! Brute-force oracles for matchers, the coverage ratio and trace counting.

mod common;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seqcover::coverage::{coverage_ratio, CoverageError};
use seqcover::criteria::NamedPattern;
use seqcover::{seeded_rng, CriterionFamily, CriterionIndex, IndexPartition, TestCase, TestSuite};

use common::regex_oracle::{brute_ratio, built_in_families, check_family, OracleKind};
use common::{accepted_words, all_words, alphabet, random_model};

#[test]
fn built_in_matchers_agree_with_regex_oracle() {
    for k in 1..=4 {
        let words = all_words(k, 6);
        for t in 1..=2 {
            for (family, kind) in built_in_families(k, t) {
                check_family(&family, &kind, &words);
            }
        }
    }
}

#[test]
fn relaxed_matchers_agree_with_union_oracle() {
    for k in 1..=3 {
        let words = all_words(k, 5);
        let al = alphabet(k);
        for (base, kind) in [
            (
                CriterionFamily::kuhn_higdon(&al, 2).unwrap(),
                OracleKind::Subsequence,
            ),
            (
                CriterionFamily::consecutive_window(&al, 2).unwrap(),
                OracleKind::Window,
            ),
            (
                CriterionFamily::exact_once(&al, 2).unwrap(),
                OracleKind::ExactOnce,
            ),
        ] {
            let partition = IndexPartition::group_by(&base, |i| match i {
                CriterionIndex::Word(w) => w[0],
                _ => unreachable!(),
            });
            let relaxed = base.relax(&partition).unwrap();
            check_family(&relaxed, &OracleKind::Relaxed(Box::new(kind)), &words);
        }
    }
}

#[derive(Debug)]
enum Ast {
    Letter(usize),
    Any,
    Class(Vec<usize>, bool),
    Concat(Box<Ast>, Box<Ast>),
    Alt(Box<Ast>, Box<Ast>),
    Star(Box<Ast>),
    Plus(Box<Ast>),
    Opt(Box<Ast>),
}

fn random_ast(rng: &mut ChaCha8Rng, k: usize, depth: usize) -> Ast {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..4) {
            0 | 1 => Ast::Letter(rng.gen_range(0..k)),
            2 => Ast::Any,
            _ => {
                let set: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.5)).collect();
                let set = if set.is_empty() { vec![0] } else { set };
                Ast::Class(set, rng.gen_bool(0.5))
            }
        };
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_ast(rng, k, depth - 1));
    match rng.gen_range(0..6) {
        0 | 1 => Ast::Concat(sub(rng), sub(rng)),
        2 => Ast::Alt(sub(rng), sub(rng)),
        3 => Ast::Star(sub(rng)),
        4 => Ast::Plus(sub(rng)),
        _ => Ast::Opt(sub(rng)),
    }
}

/// The same expression in the crate's event syntax and in `regex` syntax.
fn render(ast: &Ast) -> (String, String) {
    let letter = |i: usize| {
        (
            common::LETTERS[i].to_string(),
            common::LETTERS[i].to_string(),
        )
    };
    match ast {
        Ast::Letter(i) => letter(*i),
        Ast::Any => (".".into(), ".".into()),
        Ast::Class(set, negated) => {
            let names: Vec<&str> = set.iter().map(|&i| common::LETTERS[i]).collect();
            let caret = if *negated { "^" } else { "" };
            (
                format!("[{caret}{}]", names.join(" ")),
                format!("[{caret}{}]", names.concat()),
            )
        }
        Ast::Concat(a, b) => {
            let (a, b) = (render(a), render(b));
            (
                format!("( {} ) ( {} )", a.0, b.0),
                format!("(?:{})(?:{})", a.1, b.1),
            )
        }
        Ast::Alt(a, b) => {
            let (a, b) = (render(a), render(b));
            (
                format!("( {} | {} )", a.0, b.0),
                format!("(?:{}|{})", a.1, b.1),
            )
        }
        Ast::Star(a) => {
            let a = render(a);
            (format!("( {} )*", a.0), format!("(?:{})*", a.1))
        }
        Ast::Plus(a) => {
            let a = render(a);
            (format!("( {} )+", a.0), format!("(?:{})+", a.1))
        }
        Ast::Opt(a) => {
            let a = render(a);
            (format!("( {} )?", a.0), format!("(?:{})?", a.1))
        }
    }
}

#[test]
fn custom_regular_families_agree_with_regex_crate() {
    let mut rng = seeded_rng(11, 0);
    for round in 0..60 {
        let k = 1 + round % 3;
        let al = alphabet(k);
        let asts: Vec<Ast> = (0..4).map(|_| random_ast(&mut rng, k, 4)).collect();
        let rendered: Vec<(String, String)> = asts.iter().map(render).collect();
        let patterns: Vec<NamedPattern> = rendered
            .iter()
            .enumerate()
            .map(|(i, (ours, _))| NamedPattern {
                name: format!("p{i}"),
                pattern: ours.clone(),
            })
            .collect();
        let family = CriterionFamily::custom_regular(&al, &patterns).unwrap();
        let oracle = OracleKind::Custom(
            rendered
                .iter()
                .enumerate()
                .map(|(i, (_, theirs))| (format!("p{i}"), theirs.clone()))
                .collect(),
        );
        check_family(&family, &oracle, &all_words(k, 5));
    }
}

#[test]
fn coverage_ratio_matches_enumeration() {
    let mut rng = seeded_rng(5, 0);
    let mut checked = 0;
    for round in 0..300 {
        let k = 1 + round % 3;
        let bound = rng.gen_range(1..=5);
        let model = random_model(&mut rng, k, 4, Some(bound));
        let p = accepted_words(&model, bound);
        let suite: Vec<TestCase> = p.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
        let t = rng.gen_range(1..=2);
        for (family, _) in built_in_families(k, t) {
            let (covered, feasible) = brute_ratio(&family, &p, &suite);
            let result = coverage_ratio(&family, &TestSuite::new(suite.clone()), &model, None);
            if feasible == 0 {
                assert!(
                    matches!(result, Err(CoverageError::NoFeasibleIndex)),
                    "{}",
                    family.id()
                );
                continue;
            }
            let report = result.unwrap();
            assert_eq!(
                report.ratio_exact,
                (covered, feasible),
                "{} on {:?}",
                family.id(),
                model.to_json()
            );
            assert_eq!(report.ratio, covered as f64 / feasible as f64);
            assert!(!report.capped);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn count_traces_matches_enumeration() {
    let mut rng = seeded_rng(9, 0);
    for round in 0..400 {
        let k = 1 + round % 3;
        let bound = if rng.gen_bool(0.3) {
            Some(rng.gen_range(0..=6))
        } else {
            None
        };
        let model = random_model(&mut rng, k, 5, bound);
        for max_len in 0..=6 {
            let brute = accepted_words(&model, max_len)
                .iter()
                .filter(|w| !w.is_empty())
                .count();
            assert_eq!(
                model.count_traces(max_len),
                brute.into(),
                "max_len {max_len} on {}",
                model.to_json()
            );
        }
    }
}
