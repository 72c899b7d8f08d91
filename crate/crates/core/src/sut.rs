//! An executable alternating-bit protocol with injectable bugs.
//!
//! [`AbpSystem`] is written independently of the model in
//! [`abp_model`](crate::abp_model): channels are unbounded and every event
//! checks its own precondition. Executing a test drives the system event by
//! event; the first unmet precondition fails the test. After the last event
//! the system must be idle, which catches divergences that no later event
//! happened to expose.
//!
//! A bug fires on the step that completes its trigger as a consecutive run of
//! events and leaves the system out of step with the protocol.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abp_model::ABP_EVENTS;
use crate::model::{Alphabet, TestCase};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SutError {
    #[error("unknown ABP event `{0}`")]
    UnknownEvent(String),
    #[error("bug trigger must not be empty")]
    EmptyTrigger,
    #[error("unknown bug effect `{0}`")]
    UnknownEffect(String),
    #[error("bug spec: {0}")]
    Spec(String),
    #[error("test alphabet is not the ABP alphabet")]
    AlphabetMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbpEvent {
    Send,
    Receive,
    SAck,
    SNak,
    RAck,
    RNak,
    LoseData,
    LoseAck,
    ReorderData,
    ReorderAck,
    Done,
}

impl AbpEvent {
    pub const ALL: [AbpEvent; 11] = [
        AbpEvent::Send,
        AbpEvent::Receive,
        AbpEvent::SAck,
        AbpEvent::SNak,
        AbpEvent::RAck,
        AbpEvent::RNak,
        AbpEvent::LoseData,
        AbpEvent::LoseAck,
        AbpEvent::ReorderData,
        AbpEvent::ReorderAck,
        AbpEvent::Done,
    ];

    pub fn name(self) -> &'static str {
        ABP_EVENTS[self as usize]
    }
}

impl FromStr for AbpEvent {
    type Err = SutError;

    fn from_str(s: &str) -> Result<Self, SutError> {
        ABP_EVENTS
            .iter()
            .position(|&n| n == s)
            .map(|i| AbpEvent::ALL[i])
            .ok_or_else(|| SutError::UnknownEvent(s.to_string()))
    }
}

impl fmt::Display for AbpEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BugEffect {
    /// The sender drops back to waiting and queues its packet again.
    ResendIgnoreAcks,
    /// The receiver accepts the packet but sends no acknowledgment.
    SkipAck,
    /// The sender ignores the acknowledgment it just consumed and queues its
    /// packet again.
    IgnoreAckResend,
    /// The next event fails whatever the state.
    ViolateNextPrecondition,
}

impl FromStr for BugEffect {
    type Err = SutError;

    fn from_str(s: &str) -> Result<Self, SutError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| SutError::UnknownEffect(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BugSpec {
    trigger: Vec<AbpEvent>,
    effect: BugEffect,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BugFile {
    trigger: Vec<String>,
    effect: String,
}

impl BugSpec {
    pub fn new<S: AsRef<str>>(trigger: &[S], effect: BugEffect) -> Result<Self, SutError> {
        if trigger.is_empty() {
            return Err(SutError::EmptyTrigger);
        }
        let trigger = trigger
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BugSpec { trigger, effect })
    }

    pub fn trigger(&self) -> &[AbpEvent] {
        &self.trigger
    }

    pub fn effect(&self) -> BugEffect {
        self.effect
    }

    /// `sAck,sAck` style label.
    pub fn label(&self) -> String {
        self.trigger
            .iter()
            .map(|e| e.name())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse(text: &str) -> Result<Self, SutError> {
        let file: BugFile =
            serde_json::from_str(text).map_err(|e| SutError::Spec(e.to_string()))?;
        BugSpec::new(&file.trigger, file.effect.parse()?)
    }

    pub fn to_json(&self) -> String {
        let effect = serde_json::to_value(self.effect).expect("effect serializes");
        serde_json::json!({
            "trigger": self.trigger.iter().map(|e| e.name()).collect::<Vec<_>>(),
            "effect": effect,
        })
        .to_string()
    }

    /// Whether `events` contains the trigger as a consecutive run.
    pub fn occurs_in(&self, events: &[AbpEvent]) -> bool {
        events
            .windows(self.trigger.len())
            .any(|w| w == self.trigger.as_slice())
    }
}

/// The four reference bugs.
pub fn reference_bugs() -> Vec<BugSpec> {
    let bug = |t: &[&str], e| BugSpec::new(t, e).expect("valid reference bug");
    vec![
        bug(&["sAck", "sAck"], BugEffect::ResendIgnoreAcks),
        bug(&["rNak", "rAck"], BugEffect::SkipAck),
        bug(&["sNak", "sNak", "rAck"], BugEffect::SkipAck),
        bug(&["send", "send", "sAck"], BugEffect::IgnoreAckResend),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub passed: bool,
    /// 0-based position of the failing event; the test length when the final
    /// idle check failed.
    pub failing_step: Option<usize>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SenderPhase {
    Idle,
    Waiting,
    Acknowledged,
}

/// Mutable protocol instance.
#[derive(Debug, Clone)]
pub struct AbpSystem {
    bugs: Vec<BugSpec>,
    // sender
    bit: bool,
    phase: SenderPhase,
    // receiver
    expected: bool,
    owed_ack: Option<bool>,
    delivered: usize,
    // channels, oldest first
    data: VecDeque<bool>,
    acks: VecDeque<bool>,
    poisoned: bool,
    history: Vec<AbpEvent>,
}

impl AbpSystem {
    pub fn new(bugs: Vec<BugSpec>) -> Self {
        AbpSystem {
            bugs,
            bit: false,
            phase: SenderPhase::Idle,
            expected: false,
            owed_ack: None,
            delivered: 0,
            data: VecDeque::new(),
            acks: VecDeque::new(),
            poisoned: false,
            history: Vec::new(),
        }
    }

    pub fn correct() -> Self {
        Self::new(Vec::new())
    }

    pub fn history(&self) -> &[AbpEvent] {
        &self.history
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }

    /// Nothing in flight, no acknowledgment owed and the sender not mid-message.
    pub fn is_idle(&self) -> bool {
        self.phase == SenderPhase::Idle
            && self.data.is_empty()
            && self.acks.is_empty()
            && self.owed_ack.is_none()
    }

    fn fired(&self, event: AbpEvent) -> Option<BugEffect> {
        self.bugs.iter().find_map(|b| {
            let (last, prefix) = b.trigger.split_last().expect("non-empty trigger");
            (*last == event && self.history.ends_with(prefix)).then_some(b.effect)
        })
    }

    /// Executes one event; `Err` describes the unmet precondition.
    pub fn step(&mut self, event: AbpEvent) -> Result<(), String> {
        if self.poisoned {
            return Err(format!("{event}: system left in an inconsistent state"));
        }
        let bug = self.fired(event);
        match event {
            AbpEvent::Send => {
                if self.phase == SenderPhase::Acknowledged {
                    return Err("send: current message already acknowledged".into());
                }
                self.data.push_back(self.bit);
                self.phase = SenderPhase::Waiting;
            }
            AbpEvent::Receive => {
                if self.owed_ack.is_some() {
                    return Err("receive: previous packet not acknowledged".into());
                }
                let Some(bit) = self.data.pop_front() else {
                    return Err("receive: no data in flight".into());
                };
                if bit == self.expected {
                    self.delivered += 1;
                    self.expected = !self.expected;
                }
                self.owed_ack = Some(bit);
            }
            AbpEvent::RAck => {
                let Some(bit) = self.owed_ack else {
                    return Err("rAck: no acknowledgment owed".into());
                };
                if bug != Some(BugEffect::SkipAck) {
                    self.acks.push_back(bit);
                }
                self.owed_ack = None;
            }
            AbpEvent::RNak => {
                let Some(bit) = self.owed_ack else {
                    return Err("rNak: no acknowledgment owed".into());
                };
                self.acks.push_back(!bit);
            }
            AbpEvent::SAck => {
                match self.acks.front() {
                    None => return Err("sAck: no acknowledgment in flight".into()),
                    Some(&b) if b != self.bit => {
                        return Err("sAck: acknowledgment carries the wrong bit".into())
                    }
                    Some(_) => {}
                }
                if self.phase == SenderPhase::Idle {
                    return Err("sAck: sender is not waiting".into());
                }
                self.acks.pop_front();
                self.phase = SenderPhase::Acknowledged;
            }
            AbpEvent::SNak => {
                let Some(&b) = self.acks.front() else {
                    return Err("sNak: no acknowledgment in flight".into());
                };
                if b == self.bit && self.phase != SenderPhase::Idle {
                    return Err("sNak: acknowledgment is valid".into());
                }
                self.acks.pop_front();
            }
            AbpEvent::LoseData => {
                if self.data.pop_front().is_none() {
                    return Err("loseData: data channel empty".into());
                }
            }
            AbpEvent::LoseAck => {
                if self.acks.pop_front().is_none() {
                    return Err("loseAck: ack channel empty".into());
                }
            }
            AbpEvent::ReorderData => {
                if self.data.len() < 2 {
                    return Err("reorderData: fewer than two packets".into());
                }
                self.data.swap(0, 1);
            }
            AbpEvent::ReorderAck => {
                if self.acks.len() < 2 {
                    return Err("reorderAck: fewer than two acknowledgments".into());
                }
                self.acks.swap(0, 1);
            }
            AbpEvent::Done => {
                if self.phase != SenderPhase::Acknowledged {
                    return Err("done: message not acknowledged".into());
                }
                self.phase = SenderPhase::Idle;
                self.bit = !self.bit;
            }
        }
        match bug {
            Some(BugEffect::ResendIgnoreAcks) | Some(BugEffect::IgnoreAckResend) => {
                self.phase = SenderPhase::Waiting;
                self.data.push_back(self.bit);
            }
            Some(BugEffect::ViolateNextPrecondition) => self.poisoned = true,
            Some(BugEffect::SkipAck) | None => {}
        }
        self.history.push(event);
        Ok(())
    }

    /// Runs a whole test from the current state.
    pub fn run(&mut self, events: &[AbpEvent]) -> Verdict {
        for (i, &e) in events.iter().enumerate() {
            if let Err(reason) = self.step(e) {
                return Verdict {
                    passed: false,
                    failing_step: Some(i),
                    reason: Some(reason),
                };
            }
        }
        if self.poisoned || !self.is_idle() {
            return Verdict {
                passed: false,
                failing_step: Some(events.len()),
                reason: Some("system not idle at the end of the test".into()),
            };
        }
        Verdict {
            passed: true,
            failing_step: None,
            reason: None,
        }
    }
}

/// Maps a test over the ABP alphabet to protocol events.
pub fn to_abp_events(alphabet: &Alphabet, test: &TestCase) -> Result<Vec<AbpEvent>, SutError> {
    if alphabet.names() != ABP_EVENTS {
        return Err(SutError::AlphabetMismatch);
    }
    Ok(test
        .events()
        .iter()
        .map(|e| AbpEvent::ALL[e.index()])
        .collect())
}

/// Executes `test` on a fresh system armed with `bugs`.
pub fn execute(
    bugs: &[BugSpec],
    alphabet: &Alphabet,
    test: &TestCase,
) -> Result<Verdict, SutError> {
    let events = to_abp_events(alphabet, test)?;
    Ok(AbpSystem::new(bugs.to_vec()).run(&events))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn events(names: &[&str]) -> Vec<AbpEvent> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    #[test]
    fn correct_round_trip() {
        let mut s = AbpSystem::correct();
        let v = s.run(&events(&["send", "receive", "rAck", "sAck", "done"]));
        assert!(v.passed, "{v:?}");
        assert_eq!(s.delivered(), 1);
        assert!(AbpSystem::correct().run(&[]).passed);
    }

    #[test]
    fn preconditions() {
        let v = AbpSystem::correct().run(&events(&["rAck"]));
        assert_eq!(v.failing_step, Some(0));
        let v = AbpSystem::correct().run(&events(&["send", "receive"]));
        assert_eq!(v.failing_step, Some(2), "idle check");
        assert!(!v.passed);
    }

    #[test]
    fn bug_specs() {
        assert_eq!(reference_bugs().len(), 4);
        assert_eq!(
            BugSpec::new(&["xyz"], BugEffect::SkipAck),
            Err(SutError::UnknownEvent("xyz".into()))
        );
        assert_eq!(
            BugSpec::new::<&str>(&[], BugEffect::SkipAck),
            Err(SutError::EmptyTrigger)
        );
        let b =
            BugSpec::parse(r#"{"trigger":["sAck","sAck"],"effect":"resend-ignore-acks"}"#).unwrap();
        assert_eq!(b, reference_bugs()[0]);
        assert_eq!(BugSpec::parse(&b.to_json()).unwrap(), b);
        assert!(BugSpec::parse(r#"{"trigger":["sAck"],"effect":"explode"}"#).is_err());
    }

    #[test]
    fn duplicate_ack_bug_resends() {
        // the duplicate packet is acknowledged a second time
        let t = events(&[
            "send", "send", "receive", "rAck", "receive", "rAck", "sAck", "sAck", "done",
        ]);
        assert!(AbpSystem::correct().run(&t).passed);
        let v = AbpSystem::new(vec![reference_bugs()[0].clone()]).run(&t);
        assert!(!v.passed);
        assert_eq!(v.failing_step, Some(8));
    }

    #[test]
    fn skipped_ack_is_caught() {
        let t = events(&["send", "receive", "rNak", "rAck", "sNak", "sAck", "done"]);
        assert!(AbpSystem::correct().run(&t).passed);
        let rnak_rack = reference_bugs()[1].clone();
        assert!(rnak_rack.occurs_in(&t));
        let v = AbpSystem::new(vec![rnak_rack]).run(&t);
        assert_eq!(v.failing_step, Some(5));
        let other = reference_bugs()[2].clone();
        assert!(AbpSystem::new(vec![other]).run(&t).passed);
    }

    #[test]
    fn poisoning_effect() {
        let b = BugSpec::new(&["send"], BugEffect::ViolateNextPrecondition).unwrap();
        let v = AbpSystem::new(vec![b]).run(&events(&["send", "rAck"]));
        assert_eq!(v.failing_step, Some(1));
    }
}
