//! Particle filtering with observations as synchronization barriers.
//!
//! A sweep launches a population of particles, runs each until it parks at
//! its next observe checkpoint (sampling from the prior along the way, and
//! folding the observation's log probability into its weight), then redraws
//! the population by systematic resampling before resuming. Every particle
//! must park the same number of times: if one finishes while another is
//! still parked the populations can never line up, which is reported as an
//! error rather than silently producing a biased answer. The mean weight of
//! each parked population is preserved across resampling, so the final
//! weights yield an estimate of the marginal likelihood of the observations,
//! attached to every returned state under the `:log-marginal` key.

use crate::runtime::rng::Rng;
use crate::runtime::state::State;
use crate::runtime::RuntimeError;
use crate::stat::log_sum_exp;
use crate::value::Value;

use super::{machine, trampoline, Address, AddressCursor, Checkpoint, InferOptions, Step};

enum Status {
    Parked {
        cont: Value,
        state: State,
        addr: Address,
    },
    Done {
        state: State,
    },
}

struct Particle {
    cursor: AddressCursor,
    status: Status,
}

fn run_segment(
    start: Step,
    cursor: &mut AddressCursor,
    rng: &mut Rng,
) -> Result<Status, RuntimeError> {
    let mut step = start;
    loop {
        match trampoline(step)? {
            Checkpoint::Sample {
                id,
                dist,
                cont,
                state,
            } => {
                cursor.advance(&id);
                let value = dist.sample_star(rng);
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
                let state = state.add_log_weight(dist.observe_star(&value));
                return Ok(Status::Parked { cont, state, addr });
            }
            Checkpoint::Result { state } => return Ok(Status::Done { state }),
        }
    }
}

/// Offsets `(k + u) / n` swept through the cumulative weights, one draw of
/// `u` per resampling step.
fn systematic_indices(log_weights: &[f64], u: f64) -> Result<Vec<usize>, RuntimeError> {
    let n = log_weights.len();
    let total = log_sum_exp(log_weights);
    if !total.is_finite() {
        crate::runtime::runtime_bail!(
            "cannot resample: particle weights sum to {total} in log space"
        );
    }
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - total).exp()).collect();
    let mut indices = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..n {
        let position = (k as f64 + u) / n as f64;
        while cumulative < position && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        indices.push(i);
    }
    Ok(indices)
}

fn sweep(
    entry: &Value,
    arg: Option<Value>,
    particles: usize,
    sweep_rng: &mut Rng,
    padding: u64,
) -> Result<Vec<State>, RuntimeError> {
    let mut population = Vec::with_capacity(particles);
    for _ in 0..particles {
        let mut cursor = AddressCursor::new(padding);
        let mut rng = sweep_rng.split();
        let status = run_segment(
            machine::initial_step(entry, arg.clone())?,
            &mut cursor,
            &mut rng,
        )?;
        population.push(Particle { cursor, status });
    }

    loop {
        let done = population
            .iter()
            .filter(|p| matches!(p.status, Status::Done { .. }))
            .count();
        if done == population.len() {
            break;
        }
        if done > 0 {
            let addr = population
                .iter()
                .find_map(|p| match &p.status {
                    Status::Parked { addr, .. } => Some(addr.to_string()),
                    Status::Done { .. } => None,
                })
                .unwrap_or_default();
            crate::runtime::runtime_bail!(
                "particles fell out of sync: some finished while others still wait \
                 at observe {addr}; every run of the query must contain the same \
                 number of observes"
            );
        }

        let parked: Vec<(&AddressCursor, &Value, &State, &Address)> = population
            .iter()
            .map(|p| match &p.status {
                Status::Parked { cont, state, addr } => (&p.cursor, cont, state, addr),
                Status::Done { .. } => unreachable!(),
            })
            .collect();
        let log_weights: Vec<f64> = parked.iter().map(|(_, _, s, _)| s.log_weight()).collect();
        let survivors = systematic_indices(&log_weights, sweep_rng.unit())?;
        let mean = log_sum_exp(&log_weights) - (log_weights.len() as f64).ln();

        let mut next = Vec::with_capacity(population.len());
        for chosen in survivors {
            let (cursor, cont, state, _) = parked[chosen];
            let mut cursor = cursor.clone();
            let mut rng = sweep_rng.split();
            let resumed =
                machine::apply_cont(cont.clone(), Value::Nil, state.with_log_weight(mean))?;
            let status = run_segment(resumed, &mut cursor, &mut rng)?;
            next.push(Particle { cursor, status });
        }
        population = next;
    }

    let finals: Vec<State> = population
        .into_iter()
        .map(|p| match p.status {
            Status::Done { state } => state,
            Status::Parked { .. } => unreachable!(),
        })
        .collect();
    let log_weights: Vec<f64> = finals.iter().map(|s| s.log_weight()).collect();
    let log_marginal = log_sum_exp(&log_weights) - (log_weights.len() as f64).ln();
    Ok(finals
        .into_iter()
        .map(|s| s.with_extra(Value::key("log-marginal"), Value::Real(log_marginal)))
        .collect())
}

pub struct Sweeps {
    entry: Value,
    arg: Option<Value>,
    root: Rng,
    particles: usize,
    padding: u64,
    buffer: std::collections::VecDeque<State>,
    failed: bool,
}

impl Iterator for Sweeps {
    type Item = Result<State, RuntimeError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.buffer.is_empty() {
            if self.particles == 0 {
                self.failed = true;
                return Some(Err(RuntimeError::new("smc needs at least one particle")));
            }
            let mut sweep_rng = self.root.split();
            match sweep(
                &self.entry,
                self.arg.clone(),
                self.particles,
                &mut sweep_rng,
                self.padding,
            ) {
                Ok(states) => self.buffer.extend(states),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        self.buffer.pop_front().map(Ok)
    }
}

/// Stream of particle populations, one full sweep at a time; pulling past
/// the end of a population starts the next sweep.
pub fn samples(entry: Value, arg: Option<Value>, opts: &InferOptions) -> Sweeps {
    Sweeps {
        entry,
        arg,
        root: Rng::seeded(opts.seed),
        particles: opts.particles,
        padding: opts.padding,
        buffer: std::collections::VecDeque::new(),
        failed: false,
    }
}
