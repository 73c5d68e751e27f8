// A particle filter tracking a drifting value through three noisy readings.
//
// Each observe is a synchronization barrier: the population stops there,
// resamples in proportion to the accumulated weights, and carries on. The
// sweep also leaves its evidence estimate on every final state under the
// :log-marginal key, compared below against the exact Kalman value.

use anglican::inference::{infer, Algorithm, InferOptions};
use anglican::program::load_program;
use anglican::stat;
use anglican::value::Value;

const SOURCE: &str = r#"
(defquery tracker
  (let [x1 (sample (normal 0.0 5.0))
        _  (observe (normal x1 1.0) 1.2)
        x2 (sample (normal x1 1.0))
        _  (observe (normal x2 1.0) 2.3)
        x3 (sample (normal x2 1.0))
        _  (observe (normal x3 1.0) 3.1)]
    {:x1 x1, :x2 x2, :x3 x3}))
"#;

const OBSERVATIONS: [f64; 3] = [1.2, 2.3, 3.1];

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (std::f64::consts::TAU * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Kalman recursion for the same model: exact log evidence and exact
/// posterior mean of the final position.
fn kalman() -> (f64, f64) {
    let (mut mean, mut var) = (0.0, 25.0);
    let mut log_marginal = 0.0;
    for (step, y) in OBSERVATIONS.iter().enumerate() {
        if step > 0 {
            var += 1.0;
        }
        log_marginal += ln_normal(*y, mean, var + 1.0);
        let posterior_var = 1.0 / (1.0 / var + 1.0);
        mean = posterior_var * (mean / var + y);
        var = posterior_var;
    }
    (log_marginal, mean)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = load_program(SOURCE)?;
    let query = program.single_query().expect("one query");
    let particles = 2000;
    let opts = InferOptions {
        seed: 5,
        particles,
        ..InferOptions::default()
    };

    let mut weighted_x3 = Vec::new();
    let mut log_marginal = None;
    for state in infer(Algorithm::Smc, query, None, &opts).take(particles) {
        let state = state?;
        let x3 = state
            .result()
            .get(&Value::key("x3"))
            .and_then(Value::as_f64)
            .expect("numeric :x3");
        weighted_x3.push((x3, state.log_weight()));
        log_marginal = state
            .get_extra(&Value::key("log-marginal"))
            .and_then(|v| v.as_f64());
    }

    let (exact_lm, exact_mean) = kalman();
    println!("particles            {particles}");
    println!(
        "mean of x3           {:.3}  (exact {exact_mean:.3})",
        stat::weighted_mean(&weighted_x3)?
    );
    println!(
        "log evidence         {:.3}  (exact {exact_lm:.3})",
        log_marginal.expect("every smc state carries :log-marginal")
    );
    Ok(())
}
