//! Distributions: validated constructors, samplers, and log densities.
//!
//! `sample_star` draws a value, `observe_star` scores one. Scoring a value
//! outside the support returns negative infinity rather than an error, so
//! zero-probability observations flow through inference as weights.

use std::f64::consts::PI;
use std::fmt;

use rand_distr::Distribution as _;
use statrs::function::gamma::ln_gamma;

use crate::runtime::{runtime_bail, Rng, RuntimeError};
use crate::value::{value_eq, Value};

#[derive(Clone, Debug)]
pub enum Distribution {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Shape/rate parameterization.
    Gamma {
        shape: f64,
        rate: f64,
    },
    Beta {
        a: f64,
        b: f64,
    },
    /// Weighted coin over booleans.
    Flip {
        p: f64,
    },
    /// Weighted coin over {0, 1}.
    Bernoulli {
        p: f64,
    },
    /// Arbitrary values with relative weights; duplicate values pool their weight.
    Categorical {
        items: Vec<(Value, f64)>,
        total: f64,
    },
    /// Indices 0..n with relative weights.
    Discrete {
        weights: Vec<f64>,
        total: f64,
    },
    /// Integers lo..hi, upper bound exclusive.
    UniformDiscrete {
        lo: i64,
        hi: i64,
    },
    /// Reals in [lo, hi).
    UniformContinuous {
        lo: f64,
        hi: f64,
    },
}

fn require_finite(name: &str, what: &str, x: f64) -> Result<(), RuntimeError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(RuntimeError::new(format!(
            "{name}: {what} must be finite, got {x}"
        )))
    }
}

impl Distribution {
    pub fn normal(mean: f64, sd: f64) -> Result<Self, RuntimeError> {
        require_finite("normal", "mean", mean)?;
        if !(sd.is_finite() && sd > 0.0) {
            runtime_bail!("normal: standard deviation must be positive, got {sd}");
        }
        Ok(Distribution::Normal { mean, sd })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, RuntimeError> {
        if !(shape.is_finite() && shape > 0.0) {
            runtime_bail!("gamma: shape must be positive, got {shape}");
        }
        if !(rate.is_finite() && rate > 0.0) {
            runtime_bail!("gamma: rate must be positive, got {rate}");
        }
        Ok(Distribution::Gamma { shape, rate })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self, RuntimeError> {
        if !(a.is_finite() && a > 0.0) || !(b.is_finite() && b > 0.0) {
            runtime_bail!("beta: both shape parameters must be positive, got {a} and {b}");
        }
        Ok(Distribution::Beta { a, b })
    }

    pub fn flip(p: f64) -> Result<Self, RuntimeError> {
        if !(0.0..=1.0).contains(&p) {
            runtime_bail!("flip: probability must lie in [0, 1], got {p}");
        }
        Ok(Distribution::Flip { p })
    }

    pub fn bernoulli(p: f64) -> Result<Self, RuntimeError> {
        if !(0.0..=1.0).contains(&p) {
            runtime_bail!("bernoulli: probability must lie in [0, 1], got {p}");
        }
        Ok(Distribution::Bernoulli { p })
    }

    pub fn categorical(items: Vec<(Value, f64)>) -> Result<Self, RuntimeError> {
        if items.is_empty() {
            runtime_bail!("categorical: needs at least one value-weight pair");
        }
        let mut total = 0.0;
        for (_, w) in &items {
            if !(w.is_finite() && *w >= 0.0) {
                runtime_bail!("categorical: weights must be non-negative, got {w}");
            }
            total += w;
        }
        if total <= 0.0 {
            runtime_bail!("categorical: total weight must be positive");
        }
        Ok(Distribution::Categorical { items, total })
    }

    pub fn discrete(weights: Vec<f64>) -> Result<Self, RuntimeError> {
        if weights.is_empty() {
            runtime_bail!("discrete: needs at least one weight");
        }
        let mut total = 0.0;
        for w in &weights {
            if !(w.is_finite() && *w >= 0.0) {
                runtime_bail!("discrete: weights must be non-negative, got {w}");
            }
            total += w;
        }
        if total <= 0.0 {
            runtime_bail!("discrete: total weight must be positive");
        }
        Ok(Distribution::Discrete { weights, total })
    }

    pub fn uniform_discrete(lo: i64, hi: i64) -> Result<Self, RuntimeError> {
        if lo >= hi {
            runtime_bail!("uniform-discrete: empty range [{lo}, {hi})");
        }
        Ok(Distribution::UniformDiscrete { lo, hi })
    }

    pub fn uniform_continuous(lo: f64, hi: f64) -> Result<Self, RuntimeError> {
        require_finite("uniform-continuous", "lower bound", lo)?;
        require_finite("uniform-continuous", "upper bound", hi)?;
        if lo >= hi {
            runtime_bail!("uniform-continuous: empty range [{lo}, {hi})");
        }
        Ok(Distribution::UniformContinuous { lo, hi })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Normal { .. } => "normal",
            Distribution::Gamma { .. } => "gamma",
            Distribution::Beta { .. } => "beta",
            Distribution::Flip { .. } => "flip",
            Distribution::Bernoulli { .. } => "bernoulli",
            Distribution::Categorical { .. } => "categorical",
            Distribution::Discrete { .. } => "discrete",
            Distribution::UniformDiscrete { .. } => "uniform-discrete",
            Distribution::UniformContinuous { .. } => "uniform-continuous",
        }
    }

    /// Draws one value. Continuous families return reals, flip returns a
    /// boolean, bernoulli/discrete/uniform-discrete return ints, categorical
    /// returns whatever value the drawn pair holds.
    pub fn sample_star(&self, rng: &mut Rng) -> Value {
        match self {
            Distribution::Normal { mean, sd } => {
                let d = rand_distr::Normal::new(*mean, *sd).expect("validated at construction");
                Value::Real(d.sample(rng.inner()))
            }
            Distribution::Gamma { shape, rate } => {
                let d =
                    rand_distr::Gamma::new(*shape, 1.0 / rate).expect("validated at construction");
                Value::Real(d.sample(rng.inner()))
            }
            Distribution::Beta { a, b } => {
                let d = rand_distr::Beta::new(*a, *b).expect("validated at construction");
                Value::Real(d.sample(rng.inner()))
            }
            Distribution::Flip { p } => Value::Bool(rng.unit() < *p),
            Distribution::Bernoulli { p } => Value::Int(i64::from(rng.unit() < *p)),
            Distribution::Categorical { items, total } => {
                let mut u = rng.unit() * total;
                for (v, w) in items {
                    u -= w;
                    if u < 0.0 {
                        return v.clone();
                    }
                }
                items.last().expect("non-empty").0.clone()
            }
            Distribution::Discrete { weights, total } => {
                let mut u = rng.unit() * total;
                for (i, w) in weights.iter().enumerate() {
                    u -= w;
                    if u < 0.0 {
                        return Value::Int(i as i64);
                    }
                }
                Value::Int(weights.len() as i64 - 1)
            }
            Distribution::UniformDiscrete { lo, hi } => Value::Int(rng.int_range(*lo, *hi)),
            Distribution::UniformContinuous { lo, hi } => Value::Real(lo + rng.unit() * (hi - lo)),
        }
    }

    /// Log density (continuous) or log mass (discrete) of `v`; -inf outside
    /// the support or for values of the wrong type.
    pub fn observe_star(&self, v: &Value) -> f64 {
        match self {
            Distribution::Normal { mean, sd } => match v.as_f64() {
                Some(x) => {
                    let z = (x - mean) / sd;
                    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * z * z
                }
                None => f64::NEG_INFINITY,
            },
            Distribution::Gamma { shape, rate } => match v.as_f64() {
                Some(x) if x > 0.0 => {
                    shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * x.ln() - rate * x
                }
                _ => f64::NEG_INFINITY,
            },
            Distribution::Beta { a, b } => match v.as_f64() {
                Some(x) if x > 0.0 && x < 1.0 => {
                    let ln_beta = ln_gamma(*a) + ln_gamma(*b) - ln_gamma(a + b);
                    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta
                }
                _ => f64::NEG_INFINITY,
            },
            Distribution::Flip { p } => match v {
                Value::Bool(true) => p.ln(),
                Value::Bool(false) => (1.0 - p).ln(),
                _ => f64::NEG_INFINITY,
            },
            Distribution::Bernoulli { p } => match v {
                Value::Int(1) => p.ln(),
                Value::Int(0) => (1.0 - p).ln(),
                _ => f64::NEG_INFINITY,
            },
            Distribution::Categorical { items, total } => {
                let matched: f64 = items
                    .iter()
                    .filter(|(x, _)| value_eq(x, v))
                    .map(|(_, w)| w)
                    .sum();
                (matched / total).ln()
            }
            Distribution::Discrete { weights, total } => match v {
                Value::Int(i) if *i >= 0 && (*i as usize) < weights.len() => {
                    (weights[*i as usize] / total).ln()
                }
                _ => f64::NEG_INFINITY,
            },
            Distribution::UniformDiscrete { lo, hi } => match v {
                Value::Int(i) if i >= lo && i < hi => -((hi - lo) as f64).ln(),
                _ => f64::NEG_INFINITY,
            },
            Distribution::UniformContinuous { lo, hi } => match v.as_f64() {
                Some(x) if x >= *lo && x < *hi => -(hi - lo).ln(),
                _ => f64::NEG_INFINITY,
            },
        }
    }

    /// Full support as values when it is finite and enumerable.
    pub fn enumerable_support(&self) -> Option<Vec<Value>> {
        match self {
            Distribution::Flip { .. } => Some(vec![Value::Bool(false), Value::Bool(true)]),
            Distribution::Bernoulli { .. } => Some(vec![Value::Int(0), Value::Int(1)]),
            Distribution::Categorical { items, .. } => {
                let mut vals: Vec<Value> = Vec::new();
                for (v, _) in items {
                    if !vals.iter().any(|x| value_eq(x, v)) {
                        vals.push(v.clone());
                    }
                }
                Some(vals)
            }
            Distribution::Discrete { weights, .. } => {
                Some((0..weights.len() as i64).map(Value::Int).collect())
            }
            Distribution::UniformDiscrete { lo, hi } => Some((*lo..*hi).map(Value::Int).collect()),
            _ => None,
        }
    }

    pub fn structural_eq(&self, other: &Distribution) -> bool {
        use Distribution::*;
        match (self, other) {
            (Normal { mean: m1, sd: s1 }, Normal { mean: m2, sd: s2 }) => m1 == m2 && s1 == s2,
            (
                Gamma {
                    shape: a1,
                    rate: r1,
                },
                Gamma {
                    shape: a2,
                    rate: r2,
                },
            ) => a1 == a2 && r1 == r2,
            (Beta { a: a1, b: b1 }, Beta { a: a2, b: b2 }) => a1 == a2 && b1 == b2,
            (Flip { p: p1 }, Flip { p: p2 }) => p1 == p2,
            (Bernoulli { p: p1 }, Bernoulli { p: p2 }) => p1 == p2,
            (Categorical { items: i1, .. }, Categorical { items: i2, .. }) => {
                i1.len() == i2.len()
                    && i1
                        .iter()
                        .zip(i2.iter())
                        .all(|((v1, w1), (v2, w2))| value_eq(v1, v2) && w1 == w2)
            }
            (Discrete { weights: w1, .. }, Discrete { weights: w2, .. }) => w1 == w2,
            (UniformDiscrete { lo: l1, hi: h1 }, UniformDiscrete { lo: l2, hi: h2 }) => {
                l1 == l2 && h1 == h2
            }
            (UniformContinuous { lo: l1, hi: h1 }, UniformContinuous { lo: l2, hi: h2 }) => {
                l1 == l2 && h1 == h2
            }
            _ => false,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::value::format_real as real;
        match self {
            Distribution::Normal { mean, sd } => {
                write!(f, "#<normal {} {}>", real(*mean), real(*sd))
            }
            Distribution::Gamma { shape, rate } => {
                write!(f, "#<gamma {} {}>", real(*shape), real(*rate))
            }
            Distribution::Beta { a, b } => write!(f, "#<beta {} {}>", real(*a), real(*b)),
            Distribution::Flip { p } => write!(f, "#<flip {}>", real(*p)),
            Distribution::Bernoulli { p } => write!(f, "#<bernoulli {}>", real(*p)),
            Distribution::Categorical { items, .. } => {
                write!(f, "#<categorical")?;
                for (v, w) in items {
                    write!(f, " [{} {}]", v, real(*w))?;
                }
                write!(f, ">")
            }
            Distribution::Discrete { weights, .. } => {
                write!(f, "#<discrete")?;
                for w in weights {
                    write!(f, " {}", real(*w))?;
                }
                write!(f, ">")
            }
            Distribution::UniformDiscrete { lo, hi } => {
                write!(f, "#<uniform-discrete {lo} {hi}>")
            }
            Distribution::UniformContinuous { lo, hi } => {
                write!(f, "#<uniform-continuous {} {}>", real(*lo), real(*hi))
            }
        }
    }
}
