//! Single-site Metropolis-Hastings over the database of random choices.
//!
//! Each trace records, per address, the drawn value and its log probability.
//! A proposal picks one recorded address uniformly, reruns the program from
//! the start redrawing that choice, and reuses recorded values at every
//! other address it revisits (rescoring them, since their distributions may
//! have changed). Choices the rerun never revisits fall out of the database;
//! choices at unvisited-before addresses are drawn fresh. The accept ratio
//! accounts for the joint density of both traces, the database sizes, and
//! the probability of the fresh and dropped choices.

use crate::runtime::dist::Distribution;
use crate::runtime::rng::Rng;
use crate::runtime::state::State;
use crate::runtime::RuntimeError;
use crate::value::Value;

use super::{machine, run_with_handler, Address, Handler, InferOptions};

#[derive(Clone, Debug)]
pub struct Recorded {
    pub value: Value,
    pub log_prob: f64,
}

pub type Db = Vec<(Address, Recorded)>;

struct LmhHandler<'a> {
    rng: Rng,
    prev: &'a Db,
    resample: Option<&'a Address>,
    db: Db,
    fresh: f64,
    reused: Vec<Address>,
}

impl Handler for LmhHandler<'_> {
    fn on_sample(
        &mut self,
        addr: &Address,
        dist: &Distribution,
        state: State,
    ) -> Result<(Value, State), RuntimeError> {
        let picked = self.resample.is_some_and(|r| r == addr);
        if !picked {
            if let Some((_, rec)) = self.prev.iter().find(|(a, _)| a == addr) {
                let log_prob = dist.observe_star(&rec.value);
                if log_prob > f64::NEG_INFINITY {
                    let value = rec.value.clone();
                    self.db.push((
                        addr.clone(),
                        Recorded {
                            value: value.clone(),
                            log_prob,
                        },
                    ));
                    self.reused.push(addr.clone());
                    return Ok((value, state));
                }
            }
        }
        let value = dist.sample_star(&mut self.rng);
        let log_prob = dist.observe_star(&value);
        self.fresh += log_prob;
        self.db.push((
            addr.clone(),
            Recorded {
                value: value.clone(),
                log_prob,
            },
        ));
        Ok((value, state))
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

struct Trace {
    state: State,
    db: Db,
    log_joint: f64,
    fresh: f64,
    reused: Vec<Address>,
}

fn run_trace(
    entry: &Value,
    arg: Option<Value>,
    rng: Rng,
    padding: u64,
    prev: &Db,
    resample: Option<&Address>,
) -> Result<Trace, RuntimeError> {
    let mut handler = LmhHandler {
        rng,
        prev,
        resample,
        db: Vec::new(),
        fresh: 0.0,
        reused: Vec::new(),
    };
    let start = machine::initial_step(entry, arg)?;
    let state = run_with_handler(&mut handler, start, padding)?;
    let log_joint = state.log_weight() + handler.db.iter().map(|(_, r)| r.log_prob).sum::<f64>();
    Ok(Trace {
        state,
        db: handler.db,
        log_joint,
        fresh: handler.fresh,
        reused: handler.reused,
    })
}

pub struct Chain {
    entry: Value,
    arg: Option<Value>,
    root: Rng,
    padding: u64,
    current: Option<Trace>,
}

impl Chain {
    fn transition(&mut self) -> Result<State, RuntimeError> {
        if self.current.is_none() {
            let initial = run_trace(
                &self.entry,
                self.arg.clone(),
                self.root.split(),
                self.padding,
                &Vec::new(),
                None,
            )?;
            self.current = Some(initial);
        }
        let current = self.current.as_ref().unwrap();
        if !current.db.is_empty() {
            let pick = self.root.int_range(0, current.db.len() as i64) as usize;
            let picked = current.db[pick].0.clone();
            let proposal = run_trace(
                &self.entry,
                self.arg.clone(),
                self.root.split(),
                self.padding,
                &current.db,
                Some(&picked),
            )?;
            let accept = if current.log_joint == f64::NEG_INFINITY {
                proposal.log_joint > f64::NEG_INFINITY
            } else {
                let stale: f64 = current
                    .db
                    .iter()
                    .filter(|(a, _)| !proposal.reused.contains(a))
                    .map(|(_, r)| r.log_prob)
                    .sum();
                let ratio = (proposal.log_joint - current.log_joint)
                    + ((current.db.len() as f64).ln() - (proposal.db.len() as f64).ln())
                    + stale
                    - proposal.fresh;
                self.root.unit().ln() < ratio
            };
            if accept {
                self.current = Some(proposal);
            }
        }
        let state = &self.current.as_ref().unwrap().state;
        Ok(state.with_log_weight(0.0))
    }
}

impl Iterator for Chain {
    type Item = Result<State, RuntimeError>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.transition())
    }
}

/// Unbounded Markov chain over traces; each element is the state after one
/// proposal, unweighted. Burn-in is the consumer's `skip`.
pub fn samples(entry: Value, arg: Option<Value>, opts: &InferOptions) -> Chain {
    Chain {
        entry,
        arg,
        root: Rng::seeded(opts.seed),
        padding: opts.padding,
        current: None,
    }
}
