//! JSON criterion specifications.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CriteriaError, CriterionFamily, IndexPartition};
use crate::model::{Alphabet, Event};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedPattern {
    pub name: String,
    pub pattern: String,
}

/// A criterion family description, e.g. `{"kind": "kuhn_higdon", "t": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CriterionSpec {
    ClassicTway {
        n: usize,
        t: usize,
    },
    KuhnHigdon {
        t: usize,
    },
    ExactOnce {
        t: usize,
    },
    ConsecutiveWindow {
        t: usize,
    },
    MessageOrder {
        sends: Vec<String>,
        receives: Vec<String>,
    },
    TransactionSafety {
        debits: Vec<String>,
        credits: Vec<String>,
    },
    Symmetry {
        n: usize,
    },
    CustomRegular {
        indices: Vec<NamedPattern>,
    },
    Relaxed {
        base: Box<CriterionSpec>,
        blocks: Vec<Vec<Value>>,
    },
}

fn events(alphabet: &Alphabet, names: &[String]) -> Result<Vec<Event>, CriteriaError> {
    names
        .iter()
        .map(|n| alphabet.event(n).map_err(CriteriaError::from))
        .collect()
}

impl CriterionSpec {
    pub fn parse(text: &str) -> Result<Self, CriteriaError> {
        serde_json::from_str(text).map_err(|e| CriteriaError::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialization cannot fail")
    }

    /// Builds the family over `alphabet` (board-symmetry families bring their
    /// own cell alphabet).
    pub fn build(&self, alphabet: &Alphabet) -> Result<CriterionFamily, CriteriaError> {
        match self {
            CriterionSpec::ClassicTway { n, t } => CriterionFamily::classic_tway(alphabet, *n, *t),
            CriterionSpec::KuhnHigdon { t } => CriterionFamily::kuhn_higdon(alphabet, *t),
            CriterionSpec::ExactOnce { t } => CriterionFamily::exact_once(alphabet, *t),
            CriterionSpec::ConsecutiveWindow { t } => {
                CriterionFamily::consecutive_window(alphabet, *t)
            }
            CriterionSpec::MessageOrder { sends, receives } => CriterionFamily::message_order(
                alphabet,
                &events(alphabet, sends)?,
                &events(alphabet, receives)?,
            ),
            CriterionSpec::TransactionSafety { debits, credits } => {
                CriterionFamily::transaction_safety(
                    alphabet,
                    &events(alphabet, debits)?,
                    &events(alphabet, credits)?,
                )
            }
            CriterionSpec::Symmetry { n } => CriterionFamily::symmetry_classes(*n),
            CriterionSpec::CustomRegular { indices } => {
                CriterionFamily::custom_regular(alphabet, indices)
            }
            CriterionSpec::Relaxed { base, blocks } => {
                let base = base.build(alphabet)?;
                let blocks = blocks
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|v| base.parse_index(v))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let partition = IndexPartition::new(&base, blocks)?;
                base.relax(&partition)
            }
        }
    }
}
