//! Random processes: exchangeable sequences driven by produce/absorb.
//!
//! `produce` gives the predictive distribution for the next draw; `absorb`
//! returns a new process updated with an observed value. Processes are
//! immutable, so absorbing never disturbs other holders of the same process.

use std::fmt;

use crate::runtime::dist::Distribution;
use crate::runtime::{runtime_bail, RuntimeError};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq)]
pub enum RandomProcess {
    /// Conjugate coin: predictive is bernoulli(a / (a + b)); absorbing 1
    /// increments a, absorbing 0 increments b.
    BetaBernoulli { a: f64, b: f64 },
}

impl RandomProcess {
    pub fn beta_bernoulli(a: f64, b: f64) -> Result<Self, RuntimeError> {
        if !(a.is_finite() && a > 0.0) || !(b.is_finite() && b > 0.0) {
            runtime_bail!("beta-bernoulli: pseudocounts must be positive, got {a} and {b}");
        }
        Ok(RandomProcess::BetaBernoulli { a, b })
    }

    pub fn name(&self) -> &'static str {
        match self {
            RandomProcess::BetaBernoulli { .. } => "beta-bernoulli",
        }
    }

    pub fn produce(&self) -> Result<Distribution, RuntimeError> {
        match self {
            RandomProcess::BetaBernoulli { a, b } => Distribution::bernoulli(a / (a + b)),
        }
    }

    pub fn absorb(&self, value: &Value) -> Result<RandomProcess, RuntimeError> {
        match self {
            RandomProcess::BetaBernoulli { a, b } => {
                let hit = match value {
                    Value::Int(1) => true,
                    Value::Int(0) => false,
                    other => runtime_bail!("beta-bernoulli: cannot absorb {other}"),
                };
                if hit {
                    RandomProcess::beta_bernoulli(a + 1.0, *b)
                } else {
                    RandomProcess::beta_bernoulli(*a, b + 1.0)
                }
            }
        }
    }
}

impl fmt::Display for RandomProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::value::format_real as real;
        match self {
            RandomProcess::BetaBernoulli { a, b } => {
                write!(f, "#<beta-bernoulli {} {}>", real(*a), real(*b))
            }
        }
    }
}
