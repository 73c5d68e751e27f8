//! Summary statistics over plain and log-weighted samples.
//!
//! Weighted quantities take weights in log space and self-normalize, so they
//! work directly on the log-weights produced by inference without overflow
//! even when individual weights are astronomically small.

use crate::runtime::{runtime_bail, RuntimeError};

/// Numerically stable log(sum(exp(xs))). Empty input gives negative infinity.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn mean(xs: &[f64]) -> Result<f64, RuntimeError> {
    if xs.is_empty() {
        runtime_bail!("mean: empty input");
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation (divides by n, not n-1).
pub fn std(xs: &[f64]) -> Result<f64, RuntimeError> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    Ok(var.sqrt())
}

fn normalized_weights(log_weights: &[f64]) -> Result<Vec<f64>, RuntimeError> {
    if log_weights.is_empty() {
        runtime_bail!("weighted statistic: empty input");
    }
    let total = log_sum_exp(log_weights);
    if !total.is_finite() {
        runtime_bail!("weighted statistic: total weight is zero");
    }
    Ok(log_weights.iter().map(|lw| (lw - total).exp()).collect())
}

/// Self-normalized mean of `(value, log-weight)` samples.
pub fn weighted_mean(samples: &[(f64, f64)]) -> Result<f64, RuntimeError> {
    let lws: Vec<f64> = samples.iter().map(|(_, lw)| *lw).collect();
    let ws = normalized_weights(&lws)?;
    Ok(samples.iter().zip(&ws).map(|((x, _), w)| x * w).sum())
}

/// Normalized weight mass of the samples satisfying the predicate.
pub fn empirical_probability<T>(
    samples: &[(T, f64)],
    pred: impl Fn(&T) -> bool,
) -> Result<f64, RuntimeError> {
    let lws: Vec<f64> = samples.iter().map(|(_, lw)| *lw).collect();
    let ws = normalized_weights(&lws)?;
    Ok(samples
        .iter()
        .zip(&ws)
        .filter(|((x, _), _)| pred(x))
        .map(|(_, w)| w)
        .sum())
}

/// Effective sample size: (sum w)^2 / sum w^2, computed in log space.
pub fn ess(log_weights: &[f64]) -> Result<f64, RuntimeError> {
    if log_weights.is_empty() {
        runtime_bail!("ess: empty input");
    }
    let total = log_sum_exp(log_weights);
    if !total.is_finite() {
        runtime_bail!("ess: total weight is zero");
    }
    let doubled: Vec<f64> = log_weights.iter().map(|lw| 2.0 * lw).collect();
    Ok((2.0 * total - log_sum_exp(&doubled)).exp())
}

/// Equal-width histogram as `(bin center, count)` rows. The max value lands
/// in the last bin; identical values collapse to a single bin.
pub fn histogram(xs: &[f64], bins: usize) -> Result<Vec<(f64, usize)>, RuntimeError> {
    if xs.is_empty() {
        runtime_bail!("histogram: empty input");
    }
    if bins == 0 {
        runtime_bail!("histogram: bin count must be at least 1");
    }
    if xs.iter().any(|x| !x.is_finite()) {
        runtime_bail!("histogram: input contains a non-finite value");
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(vec![(lo, xs.len())]);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_computation_when_safe() {
        let xs = [0.0, 1.0, -2.0];
        let direct = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_extreme_magnitudes() {
        let got = log_sum_exp(&[-1000.0, -1001.0]);
        let expected = -1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn mean_and_std_on_known_data() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert!((mean(&xs).unwrap() - 5.0).abs() < 1e-12);
        assert!((std(&xs).unwrap() - 2.0).abs() < 1e-12);
        assert!(mean(&[]).is_err());
    }

    #[test]
    fn weighted_mean_ignores_weight_scale() {
        let a: Vec<(f64, f64)> = vec![(1.0, -0.5), (3.0, -1.5), (7.0, -0.1)];
        let b: Vec<(f64, f64)> = a.iter().map(|(x, lw)| (*x, lw + 123.0)).collect();
        let ma = weighted_mean(&a).unwrap();
        let mb = weighted_mean(&b).unwrap();
        assert!((ma - mb).abs() < 1e-10);
    }

    #[test]
    fn weighted_mean_of_equal_weights_is_plain_mean() {
        let samples: Vec<(f64, f64)> = vec![(1.0, -3.0), (2.0, -3.0), (3.0, -3.0)];
        assert!((weighted_mean(&samples).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_probability_counts_weight_mass() {
        let samples = vec![(true, 0.0), (false, 0.0), (true, 0.0), (true, 0.0)];
        let p = empirical_probability(&samples, |b| *b).unwrap();
        assert!((p - 0.75).abs() < 1e-12);
        let heavy = vec![(true, 0.0), (false, f64::ln(3.0))];
        let p = empirical_probability(&heavy, |b| *b).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ess_bounds() {
        let uniform = [1.5; 10];
        assert!((ess(&uniform).unwrap() - 10.0).abs() < 1e-9);
        let one_hot = [0.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
        assert!((ess(&one_hot).unwrap() - 1.0).abs() < 1e-9);
        assert!(ess(&[f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn histogram_partitions_all_samples() {
        let xs = [0.0, 0.1, 0.4, 0.5, 0.9, 1.0];
        let h = histogram(&xs, 2).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.iter().map(|(_, c)| c).sum::<usize>(), xs.len());
        assert_eq!(h[0].1, 3);
        assert_eq!(h[1].1, 3);
        assert!((h[0].0 - 0.25).abs() < 1e-12);
        let flat = histogram(&[2.0, 2.0], 5).unwrap();
        assert_eq!(flat, vec![(2.0, 2)]);
    }
}
