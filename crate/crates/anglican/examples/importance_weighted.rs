// Importance sampling on a conjugate gaussian model.
//
// Each execution draws from the prior and picks up the observation's
// log-likelihood as its weight. The weighted mean then estimates the
// posterior mean, which this model admits in closed form: observing 2.0
// through unit noise pulls the standard normal prior to N(1, 1/sqrt 2).

use anglican::inference::{infer, Algorithm, InferOptions};
use anglican::program::load_program;
use anglican::stat;

const SOURCE: &str = r#"
(defquery normal-normal
  (let [x (sample (normal 0.0 1.0))]
    (observe (normal x 1.0) 2.0)
    x))
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = load_program(SOURCE)?;
    let query = program.single_query().expect("one query");
    let opts = InferOptions {
        seed: 11,
        ..InferOptions::default()
    };

    let mut weighted = Vec::new();
    for state in infer(Algorithm::Importance, query, None, &opts).take(50_000) {
        let state = state?;
        let x = state.result().as_f64().expect("numeric result");
        weighted.push((x, state.log_weight()));
    }

    let log_weights: Vec<f64> = weighted.iter().map(|(_, lw)| *lw).collect();
    println!("samples           {}", weighted.len());
    println!("effective size    {:.1}", stat::ess(&log_weights)?);
    println!(
        "posterior mean    {:.4}  (exact 1.0)",
        stat::weighted_mean(&weighted)?
    );

    let above = stat::empirical_probability(&weighted, |x| *x > 1.0)?;
    println!("P(x > 1)          {above:.4}  (exact 0.5)");
    Ok(())
}
