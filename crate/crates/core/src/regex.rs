//! Anchored regular expressions over event names.
//!
//! Syntax, whitespace-separated:
//!
//! | form        | meaning                                   |
//! |-------------|-------------------------------------------|
//! | `name`      | one occurrence of the event `name`        |
//! | `.`         | any single event                          |
//! | `[a b]`     | any of the listed events                  |
//! | `[^a b]`    | any event except the listed ones          |
//! | `x y`       | concatenation                             |
//! | `x \| y`    | alternation                               |
//! | `x*` `x+` `x?` | repetition                             |
//! | `( ... )`   | grouping                                  |
//!
//! The whole test must match; there is no implicit `.*` on either side.

use std::fmt;

use crate::automaton::Automaton;
use crate::model::{Alphabet, Event};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for PatternError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pattern error at token {}: {}",
            self.position, self.message
        )
    }
}

impl std::error::Error for PatternError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Name(String),
    Any,
    Open,
    Close,
    ClassOpen,
    ClassClose,
    Caret,
    Bar,
    Star,
    Plus,
    Question,
}

fn tokenize(pattern: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = pattern.chars().peekable();
    let mut in_class = false;
    while let Some(&c) = chars.peek() {
        let single = match c {
            '(' => Some(Token::Open),
            ')' => Some(Token::Close),
            '[' => Some(Token::ClassOpen),
            ']' => Some(Token::ClassClose),
            '|' => Some(Token::Bar),
            '*' => Some(Token::Star),
            '+' => Some(Token::Plus),
            '?' => Some(Token::Question),
            '^' if in_class && tokens.last() == Some(&Token::ClassOpen) => Some(Token::Caret),
            _ => None,
        };
        if let Some(t) = single {
            chars.next();
            match t {
                Token::ClassOpen => in_class = true,
                Token::ClassClose => in_class = false,
                _ => {}
            }
            tokens.push(t);
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut name = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() || "()[]|*+?".contains(c) {
                break;
            }
            name.push(c);
            chars.next();
        }
        tokens.push(if name == "." {
            Token::Any
        } else {
            Token::Name(name)
        });
    }
    tokens
}

#[derive(Debug, Clone)]
enum Re {
    Epsilon,
    Set(Vec<bool>),
    Concat(Vec<Re>),
    Alt(Vec<Re>),
    Star(Box<Re>),
    Plus(Box<Re>),
    Opt(Box<Re>),
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, PatternError> {
        Err(PatternError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn alt(&mut self) -> Result<Re, PatternError> {
        let mut branches = vec![self.concat()?];
        while self.peek() == Some(&Token::Bar) {
            self.pos += 1;
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            Re::Alt(branches)
        })
    }

    fn concat(&mut self) -> Result<Re, PatternError> {
        let mut items = Vec::new();
        while let Some(t) = self.peek() {
            if matches!(t, Token::Bar | Token::Close) {
                break;
            }
            items.push(self.postfix()?);
        }
        Ok(match items.len() {
            0 => Re::Epsilon,
            1 => items.pop().unwrap(),
            _ => Re::Concat(items),
        })
    }

    fn postfix(&mut self) -> Result<Re, PatternError> {
        let mut atom = self.atom()?;
        loop {
            atom = match self.peek() {
                Some(Token::Star) => Re::Star(Box::new(atom)),
                Some(Token::Plus) => Re::Plus(Box::new(atom)),
                Some(Token::Question) => Re::Opt(Box::new(atom)),
                _ => return Ok(atom),
            };
            self.pos += 1;
        }
    }

    fn event(&self, name: &str) -> Result<Event, PatternError> {
        self.alphabet.event(name).map_err(|_| PatternError {
            position: self.pos,
            message: format!("unknown event `{name}`"),
        })
    }

    fn atom(&mut self) -> Result<Re, PatternError> {
        let n = self.alphabet.len();
        let Some(token) = self.peek().cloned() else {
            return self.err("unexpected end of pattern");
        };
        self.pos += 1;
        match token {
            Token::Name(name) => {
                let mut set = vec![false; n];
                set[self.event(&name)?.index()] = true;
                Ok(Re::Set(set))
            }
            Token::Any => Ok(Re::Set(vec![true; n])),
            Token::Open => {
                let inner = self.alt()?;
                if self.peek() != Some(&Token::Close) {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Token::ClassOpen => {
                let negated = self.peek() == Some(&Token::Caret);
                if negated {
                    self.pos += 1;
                }
                let mut set = vec![false; n];
                loop {
                    match self.peek().cloned() {
                        Some(Token::Name(name)) => {
                            set[self.event(&name)?.index()] = true;
                            self.pos += 1;
                        }
                        Some(Token::ClassClose) => {
                            self.pos += 1;
                            break;
                        }
                        _ => return self.err("expected event name or `]` in class"),
                    }
                }
                if negated {
                    set.iter_mut().for_each(|b| *b = !*b);
                }
                Ok(Re::Set(set))
            }
            other => {
                self.pos -= 1;
                self.err(format!("unexpected {other:?}"))
            }
        }
    }
}

/// Thompson construction with explicit epsilon edges, later removed.
struct EpsNfa {
    eps: Vec<Vec<usize>>,
    edges: Vec<Vec<(usize, usize)>>,
}

impl EpsNfa {
    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.edges.push(Vec::new());
        self.eps.len() - 1
    }

    /// Returns (entry, exit) of the fragment.
    fn build(&mut self, re: &Re) -> (usize, usize) {
        match re {
            Re::Epsilon => {
                let s = self.state();
                (s, s)
            }
            Re::Set(set) => {
                let s = self.state();
                let t = self.state();
                for (e, on) in set.iter().enumerate() {
                    if *on {
                        self.edges[s].push((e, t));
                    }
                }
                (s, t)
            }
            Re::Concat(items) => {
                let (first_in, mut out) = self.build(&items[0]);
                for item in &items[1..] {
                    let (i, o) = self.build(item);
                    self.eps[out].push(i);
                    out = o;
                }
                (first_in, out)
            }
            Re::Alt(branches) => {
                let s = self.state();
                let t = self.state();
                for b in branches {
                    let (i, o) = self.build(b);
                    self.eps[s].push(i);
                    self.eps[o].push(t);
                }
                (s, t)
            }
            Re::Star(inner) => {
                let s = self.state();
                let (i, o) = self.build(inner);
                self.eps[s].push(i);
                self.eps[o].push(s);
                (s, s)
            }
            Re::Plus(inner) => {
                let (i, o) = self.build(inner);
                let t = self.state();
                self.eps[o].push(i);
                self.eps[o].push(t);
                (i, t)
            }
            Re::Opt(inner) => {
                let s = self.state();
                let t = self.state();
                let (i, o) = self.build(inner);
                self.eps[s].push(i);
                self.eps[s].push(t);
                self.eps[o].push(t);
                (s, t)
            }
        }
    }

    fn closure(&self, s: usize) -> Vec<usize> {
        let mut seen = vec![false; self.eps.len()];
        let mut stack = vec![s];
        seen[s] = true;
        let mut out = Vec::new();
        while let Some(x) = stack.pop() {
            out.push(x);
            for &y in &self.eps[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        out
    }
}

/// Compiles `pattern` into an epsilon-free automaton over `alphabet`.
pub fn compile(pattern: &str, alphabet: &Alphabet) -> Result<Automaton, PatternError> {
    let mut parser = Parser {
        tokens: tokenize(pattern),
        pos: 0,
        alphabet,
    };
    let re = parser.alt()?;
    if parser.pos != parser.tokens.len() {
        return parser.err("unbalanced `)`");
    }
    let mut nfa = EpsNfa {
        eps: Vec::new(),
        edges: Vec::new(),
    };
    let (entry, exit) = nfa.build(&re);
    let n = nfa.eps.len();
    let mut out = Automaton::new(alphabet.len());
    let closures: Vec<Vec<usize>> = (0..n).map(|s| nfa.closure(s)).collect();
    for c in &closures {
        out.add_state(c.contains(&exit));
    }
    for (s, closure) in closures.iter().enumerate() {
        for &x in closure {
            for &(e, t) in &nfa.edges[x] {
                out.add_transition(s, Event(e as u16), t);
            }
        }
    }
    out.add_start(entry);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TestCase;

    fn abc() -> Alphabet {
        Alphabet::new(["a", "b", "c"]).unwrap()
    }

    fn accepts(pattern: &str, word: &[&str]) -> bool {
        let alphabet = abc();
        let a = compile(pattern, &alphabet).unwrap();
        a.accepts(TestCase::from_names(&alphabet, word).unwrap().events())
    }

    #[test]
    fn basic_operators() {
        assert!(accepts("a b", &["a", "b"]));
        assert!(!accepts("a b", &["a", "b", "c"]));
        assert!(accepts(". * a .*", &["c", "a"]));
        assert!(accepts("(a | b)+ c?", &["b", "a"]));
        assert!(!accepts("(a | b)+ c?", &[]));
        assert!(accepts("[^a]* a [^a]*", &["b", "a", "c"]));
        assert!(!accepts("[^a]* a [^a]*", &["a", "a"]));
        assert!(accepts("", &[]));
        assert!(accepts("[b c]*", &["c", "b", "c"]));
    }

    #[test]
    fn errors() {
        let alphabet = abc();
        assert!(compile("a x", &alphabet)
            .unwrap_err()
            .message
            .contains("`x`"));
        assert!(compile("(a", &alphabet).is_err());
        assert!(compile("a)", &alphabet).is_err());
        assert!(compile("*", &alphabet).is_err());
        assert!(compile("[a", &alphabet).is_err());
    }

    #[test]
    fn dotted_event_names() {
        let alphabet = Alphabet::new(["teacher.Add", "student.Submit"]).unwrap();
        let a = compile(". * teacher.Add", &alphabet).unwrap();
        let t = TestCase::from_names(&alphabet, &["student.Submit", "teacher.Add"]).unwrap();
        assert!(a.accepts(t.events()));
    }
}
