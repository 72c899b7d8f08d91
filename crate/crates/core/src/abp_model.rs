//! The bundled alternating-bit-protocol test model.
//!
//! The model is the explored state space of a small protocol description:
//! a sender with a one-bit sequence number, a receiver expecting a bit, and a
//! data and an acknowledgment channel of capacity [`CHANNEL_CAPACITY`] that
//! may lose or reorder messages. The alphabet is fixed to eleven events:
//!
//! | event | enabled when | effect |
//! |-------|--------------|--------|
//! | `send` | sender not yet acknowledged, data channel not full | queue a data packet with the sender bit |
//! | `receive` | packet in flight, no acknowledgment owed | take the oldest packet; flip the expected bit if it matched; owe an acknowledgment with the packet's bit |
//! | `rAck` | acknowledgment owed, ack channel not full | send it |
//! | `rNak` | acknowledgment owed, ack channel not full | send a corrupted one (the other bit); the real one is still owed |
//! | `sAck` | oldest ack matches the sender bit while waiting or acknowledged | consume it, mark the message acknowledged |
//! | `sNak` | oldest ack does not match, or the sender is idle | consume it |
//! | `loseData`, `loseAck` | channel non-empty | drop the oldest message |
//! | `reorderData`, `reorderAck` | at least two messages | swap the two oldest |
//! | `done` | message acknowledged | next message: flip the sender bit |
//!
//! A trace is accepted once at least one message has completed and the whole
//! system is idle again (sender idle, both channels empty, nothing owed).
//!
//! [`generate_abp_model`] rebuilds the model; [`abp_model`] loads the bundled
//! JSON copy, which is checked against the generator in the tests.

use std::collections::{HashMap, VecDeque};

use crate::model::{Alphabet, TestModel};

pub const ABP_EVENTS: [&str; 11] = [
    "send",
    "receive",
    "sAck",
    "sNak",
    "rAck",
    "rNak",
    "loseData",
    "loseAck",
    "reorderData",
    "reorderAck",
    "done",
];

pub const CHANNEL_CAPACITY: usize = 2;

const BUNDLED: &str = include_str!("../models/abp.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    Ready,
    Waiting,
    Acked,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Config {
    started: bool,
    sb: bool,
    phase: Phase,
    data: Vec<bool>,
    acks: Vec<bool>,
    rb: bool,
    due: Option<bool>,
}

impl Config {
    fn name(&self) -> String {
        let bits = |v: &[bool]| {
            v.iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect::<String>()
        };
        format!(
            "{}{}{}|{}|{}|{}{}",
            if self.started { 'S' } else { 's' },
            u8::from(self.sb),
            match self.phase {
                Phase::Ready => 'r',
                Phase::Waiting => 'w',
                Phase::Acked => 'a',
            },
            bits(&self.data),
            bits(&self.acks),
            u8::from(self.rb),
            match self.due {
                None => '-',
                Some(b) =>
                    if b {
                        '1'
                    } else {
                        '0'
                    },
            },
        )
    }

    fn accepting(&self) -> bool {
        self.started
            && self.phase == Phase::Ready
            && self.data.is_empty()
            && self.acks.is_empty()
            && self.due.is_none()
    }

    fn step(&self, event: &str, cap: usize) -> Option<Config> {
        let mut c = self.clone();
        match event {
            "send" if self.phase != Phase::Acked && self.data.len() < cap => {
                c.data.push(self.sb);
                c.phase = Phase::Waiting;
            }
            "receive" if !self.data.is_empty() && self.due.is_none() => {
                let bit = c.data.remove(0);
                if bit == self.rb {
                    c.rb = !self.rb;
                }
                c.due = Some(bit);
            }
            "rAck" if self.acks.len() < cap => {
                c.acks.push(self.due?);
                c.due = None;
            }
            "rNak" if self.acks.len() < cap => c.acks.push(!self.due?),
            "sAck" if self.acks.first() == Some(&self.sb) && self.phase != Phase::Ready => {
                c.acks.remove(0);
                c.phase = Phase::Acked;
            }
            "sNak"
                if !self.acks.is_empty()
                    && (self.acks[0] != self.sb || self.phase == Phase::Ready) =>
            {
                c.acks.remove(0);
            }
            "loseData" if !self.data.is_empty() => {
                c.data.remove(0);
            }
            "loseAck" if !self.acks.is_empty() => {
                c.acks.remove(0);
            }
            "reorderData" if self.data.len() >= 2 => c.data.swap(0, 1),
            "reorderAck" if self.acks.len() >= 2 => c.acks.swap(0, 1),
            "done" if self.phase == Phase::Acked => {
                c.phase = Phase::Ready;
                c.sb = !self.sb;
                c.started = true;
            }
            _ => return None,
        }
        Some(c)
    }
}

/// Explores the protocol state space and keeps the states from which an
/// accepting state is still reachable.
pub fn generate_abp_model() -> TestModel {
    generate_abp_model_with_capacity(CHANNEL_CAPACITY)
}

/// Same as [`generate_abp_model`] with a different channel capacity.
pub fn generate_abp_model_with_capacity(capacity: usize) -> TestModel {
    let init = Config {
        started: false,
        sb: false,
        phase: Phase::Ready,
        data: Vec::new(),
        acks: Vec::new(),
        rb: false,
        due: None,
    };
    let mut ids: HashMap<Config, usize> = HashMap::new();
    let mut configs = vec![init.clone()];
    ids.insert(init, 0);
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        for (e, name) in ABP_EVENTS.iter().enumerate() {
            if let Some(next) = configs[s].step(name, capacity) {
                let id = *ids.entry(next.clone()).or_insert_with(|| {
                    configs.push(next);
                    queue.push_back(configs.len() - 1);
                    configs.len() - 1
                });
                edges.push((s, e, id));
            }
        }
    }
    // backward reachability from accepting states
    let mut live: Vec<bool> = configs.iter().map(Config::accepting).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &(s, _, t) in &edges {
            if live[t] && !live[s] {
                live[s] = true;
                changed = true;
            }
        }
    }
    let names: Vec<String> = configs.iter().map(Config::name).collect();
    let states: Vec<&str> = (0..configs.len())
        .filter(|&s| live[s])
        .map(|s| names[s].as_str())
        .collect();
    let accepting: Vec<&str> = (0..configs.len())
        .filter(|&s| configs[s].accepting())
        .map(|s| names[s].as_str())
        .collect();
    let transitions: Vec<(&str, &str, &str)> = edges
        .iter()
        .filter(|&&(s, _, t)| live[s] && live[t])
        .map(|&(s, e, t)| (names[s].as_str(), ABP_EVENTS[e], names[t].as_str()))
        .collect();
    TestModel::from_parts(
        Alphabet::new(ABP_EVENTS).expect("fixed alphabet"),
        &states,
        &names[0],
        &accepting,
        &transitions,
        None,
    )
    .expect("generated model is well formed")
}

/// The bundled model.
pub fn abp_model() -> TestModel {
    TestModel::load(BUNDLED).expect("bundled model parses")
}

/// The bundled model as JSON text.
pub fn abp_model_json() -> &'static str {
    BUNDLED
}
