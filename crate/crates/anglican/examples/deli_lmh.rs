// The deli dilemma, answered with lightweight Metropolis-Hastings.
//
// A customer arrived 13 minutes into lunch break; someone arrived 9 minutes
// after the workday ended. The waiter gives 2:1 odds that it was the same
// person. Both hypotheses are linear gaussian, so the posterior probability
// also comes out in closed form, which the chain's estimate is printed next
// to. The chain needs a warm-up stretch, hence the skip before the take.

use std::fs;

use anglican::inference::{infer, Algorithm, InferOptions};
use anglican::program::load_program;
use anglican::stat;
use anglican::value::Value;

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (std::f64::consts::TAU * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Closed-form P(same customer | 13, 9): marginal likelihood of both
/// observations under each hypothesis, weighed by the 2:1 prior odds.
fn exact_p_same() -> f64 {
    let (prior_mean, prior_var, noise_var) = (10.0, 9.0, 1.0);
    let (lunch, dinner) = (13.0, 9.0);

    // Same customer: observe lunch from the prior predictive, then dinner
    // from the predictive of the posterior that the lunch visit leaves.
    let post_var = 1.0 / (1.0 / prior_var + 1.0 / noise_var);
    let post_mean = post_var * (prior_mean / prior_var + lunch / noise_var);
    let l_same = ln_normal(lunch, prior_mean, prior_var + noise_var)
        + ln_normal(dinner, post_mean, post_var + noise_var);

    // Different customers: two independent prior predictives.
    let l_diff = ln_normal(lunch, prior_mean, prior_var + noise_var)
        + ln_normal(dinner, prior_mean, prior_var + noise_var);

    let odds = 2.0 * (l_same - l_diff).exp();
    odds / (odds + 1.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/queries/deli.anglican");
    let program = load_program(&fs::read_to_string(path)?)?;
    let query = program.query("deli").expect("deli query");

    let opts = InferOptions {
        seed: 7,
        ..InferOptions::default()
    };
    let results: Vec<Value> = infer(Algorithm::Lmh, query, None, &opts)
        .skip(5000)
        .take(5000)
        .map(|state| Ok(state?.result().clone()))
        .collect::<Result<_, anglican::runtime::RuntimeError>>()?;

    let same_key = Value::key("same-customer");
    let weighted: Vec<(bool, f64)> = results
        .iter()
        .map(|r| (r.get(&same_key).is_some_and(Value::is_truthy), 0.0))
        .collect();
    let p_same = stat::empirical_probability(&weighted, |same| *same)?;

    let times_key = Value::key("times-to-arrive");
    let same_times: Vec<f64> = results
        .iter()
        .filter(|r| r.get(&same_key).is_some_and(Value::is_truthy))
        .filter_map(|r| r.get(&times_key)?.as_seq()?.first()?.as_f64())
        .collect();

    println!("retained samples        5000 (after 5000 burn-in)");
    println!(
        "P(same customer)        {p_same:.3}  (exact {:.3})",
        exact_p_same()
    );
    println!(
        "arrival time | same     {:.2} +- {:.2}  (exact 10.95 +- 0.69)",
        stat::mean(&same_times)?,
        stat::std(&same_times)?
    );
    Ok(())
}
