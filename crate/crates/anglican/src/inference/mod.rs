//! Execution of compiled queries and the inference algorithms over them.
//!
//! A running program never recurses on the host stack: it returns `Step`
//! values, either a thunk to bounce through [`trampoline`] or a checkpoint
//! describing why execution paused. Algorithms differ only in what they do
//! at checkpoints, which is captured by the [`Handler`] trait for the
//! straight-through algorithms and open-coded in the particle filter.

pub mod address;
pub mod importance;
pub mod lmh;
pub mod machine;
pub mod smc;

use std::str::FromStr;
use std::sync::Arc;

use crate::runtime::dist::Distribution;
use crate::runtime::state::State;
use crate::runtime::RuntimeError;
use crate::value::Value;

pub use address::{Address, AddressCursor};

/// One unit of work handed back to the trampoline.
pub enum Step {
    Thunk(Box<dyn FnOnce() -> Result<Step, RuntimeError> + Send>),
    Checkpoint(Checkpoint),
}

/// The reasons a program pauses: it needs a random value, it wants to score
/// an observation, or it finished.
pub enum Checkpoint {
    Sample {
        id: Value,
        dist: Arc<Distribution>,
        cont: Value,
        state: State,
    },
    Observe {
        id: Value,
        dist: Arc<Distribution>,
        value: Value,
        cont: Value,
        state: State,
    },
    Result {
        state: State,
    },
}

/// Forces thunks until execution pauses at a checkpoint.
pub fn trampoline(mut step: Step) -> Result<Checkpoint, RuntimeError> {
    loop {
        match step {
            Step::Thunk(t) => step = t()?,
            Step::Checkpoint(c) => return Ok(c),
        }
    }
}

/// What an algorithm does when a running program pauses.
pub trait Handler {
    /// Chooses the value a sample checkpoint resumes with.
    fn on_sample(
        &mut self,
        addr: &Address,
        dist: &Distribution,
        state: State,
    ) -> Result<(Value, State), RuntimeError>;

    /// Folds an observation into the state, usually by reweighting.
    fn on_observe(
        &mut self,
        addr: &Address,
        dist: &Distribution,
        value: &Value,
        state: State,
    ) -> Result<State, RuntimeError>;
}

/// Runs a program to completion, routing every checkpoint through the
/// handler and assigning each one its structural address.
pub fn run_with_handler<H: Handler>(
    handler: &mut H,
    start: Step,
    padding: u64,
) -> Result<State, RuntimeError> {
    let mut cursor = AddressCursor::new(padding);
    let mut step = start;
    loop {
        match trampoline(step)? {
            Checkpoint::Sample {
                id,
                dist,
                cont,
                state,
            } => {
                let addr = cursor.advance(&id);
                let (value, state) = handler.on_sample(&addr, &dist, state)?;
                step = machine::apply_cont(cont, value, state)?;
            }
            Checkpoint::Observe {
                id,
                dist,
                value,
                cont,
                state,
            } => {
                let addr = cursor.advance(&id);
                let state = handler.on_observe(&addr, &dist, &value, state)?;
                step = machine::apply_cont(cont, Value::Nil, state)?;
            }
            Checkpoint::Result { state } => return Ok(state),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Importance,
    Lmh,
    Smc,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "importance" => Ok(Algorithm::Importance),
            "lmh" => Ok(Algorithm::Lmh),
            "smc" => Ok(Algorithm::Smc),
            other => Err(format!(
                "unknown algorithm {other:?}; expected importance, lmh, or smc"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InferOptions {
    pub seed: u64,
    pub padding: u64,
    pub particles: usize,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            seed: 0,
            padding: 16,
            particles: 100,
        }
    }
}

/// A demand-driven stream of weighted states. Nothing executes until an
/// element is consumed; burn-in and sample budgets are applied by the
/// consumer with `skip` and `take`.
pub type Samples = Box<dyn Iterator<Item = Result<State, RuntimeError>> + Send>;

/// Opens a lazy stream of weighted states from the query's posterior.
/// Importance sampling and the Markov chain are unbounded; the particle
/// filter yields one population per sweep, starting a new sweep when the
/// previous one is exhausted.
pub fn infer(
    algorithm: Algorithm,
    entry: &Value,
    arg: Option<Value>,
    opts: &InferOptions,
) -> Samples {
    match algorithm {
        Algorithm::Importance => Box::new(importance::samples(entry.clone(), arg, opts)),
        Algorithm::Lmh => Box::new(lmh::samples(entry.clone(), arg, opts)),
        Algorithm::Smc => Box::new(smc::samples(entry.clone(), arg, opts)),
    }
}

/// Familiar spelling for driving a query from library code.
pub fn doquery(
    algorithm: Algorithm,
    entry: &Value,
    arg: Option<Value>,
    opts: &InferOptions,
) -> Samples {
    infer(algorithm, entry, arg, opts)
}

/// Eagerly draws a fixed number of states, stopping at the first error.
pub fn run(
    algorithm: Algorithm,
    entry: &Value,
    arg: Option<Value>,
    samples: usize,
    opts: &InferOptions,
) -> Result<Vec<State>, RuntimeError> {
    infer(algorithm, entry, arg, opts).take(samples).collect()
}
