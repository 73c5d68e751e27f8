// Random processes: a coin whose predictive distribution learns from data.
//
// beta-bernoulli(a, b) predicts heads with probability a / (a + b); absorbing
// an outcome bumps the matching pseudocount. Processes are immutable values,
// so absorbing returns a new process and the original keeps its beliefs.

use std::fs;

use anglican::inference::{infer, Algorithm, InferOptions};
use anglican::program::load_program;
use anglican::runtime::process::RandomProcess;
use anglican::value::Value;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut coin = RandomProcess::beta_bernoulli(1.0, 1.0)?;
    println!("fresh coin predicts      {}", coin.produce()?);
    for toss in [1, 1, 0] {
        coin = coin.absorb(&Value::Int(toss))?;
        println!("after absorbing {toss}        {}", coin.produce()?);
    }

    // The same update drives the coin-predictive query, whose :next samples
    // should land heads three times out of five in the long run.
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/queries/coin_predictive.anglican"
    );
    let program = load_program(&fs::read_to_string(path)?)?;
    let query = program.single_query().expect("one query");

    let runs = 20_000;
    let opts = InferOptions {
        seed: 2,
        ..InferOptions::default()
    };
    let next = Value::key("next");
    let mut heads = 0;
    for state in infer(Algorithm::Importance, query, None, &opts).take(runs) {
        if state?.result().get(&next).and_then(Value::as_int) == Some(1) {
            heads += 1;
        }
    }
    println!(
        "sampled heads rate       {:.3} over {runs} runs (expected 0.6)",
        heads as f64 / runs as f64
    );
    Ok(())
}
