// A million loop iterations without growing the host stack.
//
// Compiled code never calls continuations directly in tail position; it
// returns a thunk that the trampoline forces. The host stack therefore
// stays shallow no matter how long the program iterates, which this example
// demonstrates by watching the interpreter's instrumented depth gauge.

use std::time::Instant;

use anglican::inference::machine::{reset_stack_high_water, stack_high_water};
use anglican::inference::{run, Algorithm, InferOptions};
use anglican::program::load_program;
use anglican::value::Value;

const SOURCE: &str = r#"
(defquery count-up
  [n]
  (loop [i 0]
    (if (= i n)
      i
      (recur (+ i 1)))))
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = load_program(SOURCE)?;
    let query = program.single_query().expect("one query");
    let n = 1_000_000;

    reset_stack_high_water();
    let started = Instant::now();
    let states = run(
        Algorithm::Importance,
        query,
        Some(Value::vector(vec![Value::Int(n)])),
        1,
        &InferOptions::default(),
    )?;

    println!("loop result             {}", states[0].result());
    println!("wall time               {:.2?}", started.elapsed());
    println!("host stack high water   {} frames", stack_high_water());
    Ok(())
}
