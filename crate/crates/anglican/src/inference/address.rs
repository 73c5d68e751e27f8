//! Structural addresses for checkpoints.
//!
//! Every sample and observe form carries an identifier, and a run of the
//! program visits checkpoints in some order. An address pairs the identifier
//! with a per-identifier counter. Within an unbroken run of the same
//! identifier the counter simply increments; when a different identifier
//! interrupts and the first one later returns, its counter restarts at the
//! next multiple of the padding. Small edits to a program therefore shift
//! the addresses of one region without renumbering every checkpoint after
//! it, which keeps traces comparable across program versions.

use std::fmt;

use crate::value::{value_eq, Value};

#[derive(Clone, Debug)]
pub struct Address {
    pub id: Value,
    pub count: u64,
}

impl PartialEq for Address {
    fn eq(&self, other: &Self) -> bool {
        self.count == other.count && value_eq(&self.id, &other.id)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {}]", self.id, self.count)
    }
}

#[derive(Clone, Debug)]
pub struct AddressCursor {
    padding: u64,
    last: Option<Value>,
    counts: Vec<(Value, u64)>,
}

impl AddressCursor {
    pub fn new(padding: u64) -> Self {
        AddressCursor {
            padding: padding.max(1),
            last: None,
            counts: Vec::new(),
        }
    }

    /// Assigns the next address for a checkpoint with this identifier.
    pub fn advance(&mut self, id: &Value) -> Address {
        let continuing = self.last.as_ref().is_some_and(|l| value_eq(l, id));
        let padding = self.padding;
        let count = match self.counts.iter_mut().find(|(v, _)| value_eq(v, id)) {
            Some((_, next)) => {
                let count = if continuing {
                    *next
                } else {
                    next.div_ceil(padding) * padding
                };
                *next = count + 1;
                count
            }
            None => {
                self.counts.push((id.clone(), 1));
                0
            }
        };
        self.last = Some(id.clone());
        Address {
            id: id.clone(),
            count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(name: &str) -> Value {
        Value::sym(name)
    }

    fn addresses(padding: u64, ids: &[&str]) -> Vec<(String, u64)> {
        let mut cursor = AddressCursor::new(padding);
        ids.iter()
            .map(|name| {
                let a = cursor.advance(&id(name));
                (a.id.to_string(), a.count)
            })
            .collect()
    }

    #[test]
    fn interrupted_runs_restart_at_the_next_padding_multiple() {
        let got = addresses(16, &["C1", "C2", "C2", "C1", "C1", "C1", "C2", "C3"]);
        let want = vec![
            ("C1".into(), 0),
            ("C2".into(), 0),
            ("C2".into(), 1),
            ("C1".into(), 16),
            ("C1".into(), 17),
            ("C1".into(), 18),
            ("C2".into(), 16),
            ("C3".into(), 0),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn second_reference_sequence() {
        let got = addresses(16, &["C1", "C2", "C1", "C1", "C2", "C2", "C3"]);
        let want = vec![
            ("C1".into(), 0),
            ("C2".into(), 0),
            ("C1".into(), 16),
            ("C1".into(), 17),
            ("C2".into(), 16),
            ("C2".into(), 17),
            ("C3".into(), 0),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn long_runs_round_past_the_next_block() {
        let mut seq: Vec<&str> = vec!["A"; 17];
        seq.push("B");
        seq.push("A");
        let got = addresses(16, &seq);
        assert_eq!(got[16], ("A".into(), 16));
        assert_eq!(got[18], ("A".into(), 32));
    }

    #[test]
    fn unit_padding_keeps_plain_counters() {
        let got = addresses(1, &["A", "B", "A", "A"]);
        let want = vec![
            ("A".into(), 0),
            ("B".into(), 0),
            ("A".into(), 1),
            ("A".into(), 2),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn addresses_compare_structurally() {
        let a = Address {
            id: Value::sym("x"),
            count: 3,
        };
        let b = Address {
            id: Value::sym("x"),
            count: 3,
        };
        let c = Address {
            id: Value::key("x"),
            count: 3,
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.to_string(), "[x 3]");
    }
}
