//! Small epsilon-free nondeterministic automata over event indices, used to
//! decide whether a criterion language intersects a test model.

use std::collections::VecDeque;

use crate::model::{Event, TestModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    events: usize,
    start: Vec<usize>,
    accepting: Vec<bool>,
    // delta[state][event] -> targets
    delta: Vec<Vec<Vec<usize>>>,
}

impl Automaton {
    pub fn new(events: usize) -> Self {
        Automaton {
            events,
            start: Vec::new(),
            accepting: Vec::new(),
            delta: Vec::new(),
        }
    }

    pub fn add_state(&mut self, accepting: bool) -> usize {
        self.accepting.push(accepting);
        self.delta.push(vec![Vec::new(); self.events]);
        self.accepting.len() - 1
    }

    pub fn add_start(&mut self, state: usize) {
        if !self.start.contains(&state) {
            self.start.push(state);
        }
    }

    pub fn add_transition(&mut self, from: usize, event: Event, to: usize) {
        let targets = &mut self.delta[from][event.index()];
        if !targets.contains(&to) {
            targets.push(to);
        }
    }

    pub fn state_count(&self) -> usize {
        self.accepting.len()
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn targets(&self, state: usize, event: Event) -> &[usize] {
        &self.delta[state][event.index()]
    }

    pub fn accepts(&self, word: &[Event]) -> bool {
        let mut current = vec![false; self.state_count()];
        for &s in &self.start {
            current[s] = true;
        }
        for &e in word {
            let mut next = vec![false; self.state_count()];
            let mut any = false;
            for (s, on) in current.iter().enumerate() {
                if *on {
                    for &t in &self.delta[s][e.index()] {
                        next[t] = true;
                        any = true;
                    }
                }
            }
            if !any {
                return false;
            }
            current = next;
        }
        current
            .iter()
            .zip(&self.accepting)
            .any(|(on, acc)| *on && *acc)
    }

    /// Disjoint union; accepts a word iff some part accepts it.
    pub fn union<'a, I>(events: usize, parts: I) -> Automaton
    where
        I: IntoIterator<Item = &'a Automaton>,
    {
        let mut out = Automaton::new(events);
        for part in parts {
            assert_eq!(part.events, events, "automata over different alphabets");
            let offset = out.state_count();
            for s in 0..part.state_count() {
                out.add_state(part.accepting[s]);
            }
            for (s, row) in part.delta.iter().enumerate() {
                for (e, targets) in row.iter().enumerate() {
                    for &t in targets {
                        out.add_transition(s + offset, Event(e as u16), t + offset);
                    }
                }
            }
            for &s in &part.start {
                out.add_start(s + offset);
            }
        }
        out
    }
}

/// Outcome of a bounded emptiness check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    /// The search was cut off by a length cap before it could rule the
    /// index out, so `feasible == false` is conservative.
    pub capped: bool,
}

/// Breadth-first search of the product of `model` and `matcher` for an
/// accepted word. The model's own length bound is always respected; `cap`
/// adds an artificial bound for unbounded models.
pub fn intersects(model: &TestModel, matcher: &Automaton, cap: Option<usize>) -> Feasibility {
    let m = matcher.state_count();
    let limit = match (model.length_bound(), cap) {
        (Some(b), Some(c)) => Some(b.min(c)),
        (Some(b), None) => Some(b),
        (None, c) => c,
    };
    let artificial = match (model.length_bound(), cap) {
        (_, None) => false,
        (None, Some(_)) => true,
        (Some(b), Some(c)) => c < b,
    };
    let mut seen = vec![false; model.state_count() * m];
    let mut queue = VecDeque::new();
    for &q in &matcher.start {
        let key = model.initial() * m + q;
        if !seen[key] {
            seen[key] = true;
            queue.push_back((model.initial(), q, 0usize));
        }
    }
    let mut truncated = false;
    while let Some((s, q, depth)) = queue.pop_front() {
        if model.is_accepting(s) && matcher.is_accepting(q) {
            return Feasibility {
                feasible: true,
                capped: false,
            };
        }
        for &(e, to) in model.outgoing(s) {
            for &q2 in matcher.targets(q, e) {
                let key = to * m + q2;
                if seen[key] {
                    continue;
                }
                if limit.is_some_and(|l| depth + 1 > l) {
                    truncated = true;
                    continue;
                }
                seen[key] = true;
                queue.push_back((to, q2, depth + 1));
            }
        }
    }
    Feasibility {
        feasible: false,
        capped: truncated && artificial,
    }
}
