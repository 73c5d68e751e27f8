//! Importance sampling from the prior.
//!
//! Each sample is an independent run of the program: sample checkpoints draw
//! from their distribution, observe checkpoints add the observation's log
//! probability to the trace's log weight. The returned states carry those
//! weights, so downstream estimates must be weight-aware.

use crate::runtime::dist::Distribution;
use crate::runtime::rng::Rng;
use crate::runtime::state::State;
use crate::runtime::RuntimeError;
use crate::value::Value;

use super::{machine, run_with_handler, Address, Handler, InferOptions};

pub struct PriorHandler {
    pub rng: Rng,
}

impl Handler for PriorHandler {
    fn on_sample(
        &mut self,
        _addr: &Address,
        dist: &Distribution,
        state: State,
    ) -> Result<(Value, State), RuntimeError> {
        Ok((dist.sample_star(&mut self.rng), state))
    }

    fn on_observe(
        &mut self,
        _addr: &Address,
        dist: &Distribution,
        value: &Value,
        state: State,
    ) -> Result<State, RuntimeError> {
        Ok(state.add_log_weight(dist.observe_star(value)))
    }
}

pub struct Prior {
    entry: Value,
    arg: Option<Value>,
    root: Rng,
    padding: u64,
}

impl Iterator for Prior {
    type Item = Result<State, RuntimeError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut handler = PriorHandler {
            rng: self.root.split(),
        };
        let one = machine::initial_step(&self.entry, self.arg.clone())
            .and_then(|start| run_with_handler(&mut handler, start, self.padding));
        Some(one)
    }
}

/// Unbounded stream of independent prior runs, reweighted by their observes.
pub fn samples(entry: Value, arg: Option<Value>, opts: &InferOptions) -> Prior {
    Prior {
        entry,
        arg,
        root: Rng::seeded(opts.seed),
        padding: opts.padding,
    }
}
