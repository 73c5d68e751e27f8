// Checkpoint addressing: stable names for random choices across runs.
//
// Every sample and observe site gets an address [identifier count]. While
// one site fires repeatedly its count just increments, but when another
// site interrupts the run, the counter rounds up to the next padding block
// (16 by default). Edits to one part of a program therefore shift only
// nearby addresses, which is what lets a Metropolis step reuse most of the
// previous trace.

use anglican::inference::machine::initial_step;
use anglican::inference::{run_with_handler, Address, AddressCursor, Handler};
use anglican::program::load_program;
use anglican::runtime::dist::Distribution;
use anglican::runtime::rng::Rng;
use anglican::runtime::state::State;
use anglican::runtime::RuntimeError;
use anglican::value::Value;

const SOURCE: &str = r#"
(defquery survey
  (let [group (sample :group (flip 0.5))
        a (sample :score (normal 0.0 1.0))
        b (sample :score (normal 0.0 1.0))]
    (observe :answer (flip 0.9) true)
    [group a b (sample :score (normal 0.0 1.0))]))
"#;

struct LoggingPrior {
    rng: Rng,
}

impl Handler for LoggingPrior {
    fn on_sample(
        &mut self,
        addr: &Address,
        dist: &Distribution,
        state: State,
    ) -> Result<(Value, State), RuntimeError> {
        let value = dist.sample_star(&mut self.rng);
        println!("  sample  {addr}  {dist}  ->  {value}");
        Ok((value, state))
    }

    fn on_observe(
        &mut self,
        addr: &Address,
        dist: &Distribution,
        value: &Value,
        state: State,
    ) -> Result<State, RuntimeError> {
        println!("  observe {addr}  {dist}  scored {value}");
        Ok(state.add_log_weight(dist.observe_star(value)))
    }
}

fn table(ids: &[&str]) -> String {
    let mut cursor = AddressCursor::new(16);
    ids.iter()
        .map(|id| cursor.advance(&Value::sym(id)).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("counter padding on two checkpoint streams:");
    for ids in [
        vec!["C1", "C2", "C2", "C1", "C1", "C1", "C2", "C3"],
        vec!["C1", "C2", "C1", "C1", "C2", "C2", "C3"],
    ] {
        println!("  {:32} ->  {}", ids.join(" "), table(&ids));
    }

    println!("\naddresses assigned during one run of the survey query:");
    let program = load_program(SOURCE)?;
    let query = program.single_query().expect("one query");
    let mut handler = LoggingPrior {
        rng: Rng::seeded(9),
    };
    let state = run_with_handler(&mut handler, initial_step(query, None)?, 16)?;
    println!("  result  {}", state.result());
    Ok(())
}
