//! The state threaded through every compiled program.
//!
//! A state is immutable: every update returns a new state and never disturbs
//! snapshots held elsewhere, which is what lets particles fork cheaply and
//! lets handlers reinject modified states at checkpoints.

use std::sync::Arc;

use crate::value::{value_eq, Value};

#[derive(Clone, Debug)]
pub struct State {
    log_weight: f64,
    result: Value,
    /// Memoized results keyed by (instance identifier, argument list).
    mem: Arc<Vec<(Value, Value, Value)>>,
    /// User store keyed by key paths.
    store: Arc<Vec<(Vec<Value>, Value)>>,
    /// Algorithm-specific extras.
    extras: Arc<Vec<(Value, Value)>>,
}

impl Default for State {
    fn default() -> Self {
        State::initial()
    }
}

impl State {
    /// Fresh state: zero log-weight, nil result, empty mem and store.
    pub fn initial() -> Self {
        State {
            log_weight: 0.0,
            result: Value::Nil,
            mem: Arc::new(Vec::new()),
            store: Arc::new(Vec::new()),
            extras: Arc::new(Vec::new()),
        }
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn result(&self) -> &Value {
        &self.result
    }

    pub fn with_log_weight(&self, lw: f64) -> State {
        let mut s = self.clone();
        s.log_weight = lw;
        s
    }

    pub fn add_log_weight(&self, delta: f64) -> State {
        self.with_log_weight(self.log_weight + delta)
    }

    pub fn with_result(&self, result: Value) -> State {
        let mut s = self.clone();
        s.result = result;
        s
    }

    pub fn in_mem(&self, id: &Value, args: &Value) -> bool {
        self.mem
            .iter()
            .any(|(m, p, _)| value_eq(m, id) && value_eq(p, args))
    }

    pub fn get_mem(&self, id: &Value, args: &Value) -> Value {
        self.mem
            .iter()
            .find(|(m, p, _)| value_eq(m, id) && value_eq(p, args))
            .map(|(_, _, v)| v.clone())
            .unwrap_or(Value::Nil)
    }

    pub fn set_mem(&self, id: Value, args: Value, result: Value) -> State {
        let mut table = (*self.mem).clone();
        match table
            .iter_mut()
            .find(|(m, p, _)| value_eq(m, &id) && value_eq(p, &args))
        {
            Some(entry) => entry.2 = result,
            None => table.push((id, args, result)),
        }
        let mut s = self.clone();
        s.mem = Arc::new(table);
        s
    }

    pub fn store_put(&self, path: Vec<Value>, value: Value) -> State {
        let mut table = (*self.store).clone();
        match table.iter_mut().find(|(p, _)| paths_eq(p, &path)) {
            Some(entry) => entry.1 = value,
            None => table.push((path, value)),
        }
        let mut s = self.clone();
        s.store = Arc::new(table);
        s
    }

    /// Nil when nothing was stored under `path`.
    pub fn retrieve(&self, path: &[Value]) -> Value {
        self.store
            .iter()
            .find(|(p, _)| paths_eq(p, path))
            .map(|(_, v)| v.clone())
            .unwrap_or(Value::Nil)
    }

    pub fn get_extra(&self, key: &Value) -> Option<Value> {
        self.extras
            .iter()
            .find(|(k, _)| value_eq(k, key))
            .map(|(_, v)| v.clone())
    }

    pub fn with_extra(&self, key: Value, value: Value) -> State {
        let mut table = (*self.extras).clone();
        match table.iter_mut().find(|(k, _)| value_eq(k, &key)) {
            Some(entry) => entry.1 = value,
            None => table.push((key, value)),
        }
        let mut s = self.clone();
        s.extras = Arc::new(table);
        s
    }

    pub fn structural_eq(&self, other: &State) -> bool {
        self.log_weight.to_bits() == other.log_weight.to_bits()
            && value_eq(&self.result, &other.result)
            && self.mem.len() == other.mem.len()
            && self
                .mem
                .iter()
                .zip(other.mem.iter())
                .all(|((m1, p1, v1), (m2, p2, v2))| {
                    value_eq(m1, m2) && value_eq(p1, p2) && value_eq(v1, v2)
                })
            && self.store.len() == other.store.len()
            && self
                .store
                .iter()
                .zip(other.store.iter())
                .all(|((p1, v1), (p2, v2))| paths_eq(p1, p2) && value_eq(v1, v2))
    }
}

fn paths_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| value_eq(x, y))
}
