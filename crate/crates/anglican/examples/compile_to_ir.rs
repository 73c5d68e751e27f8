// Compiles a few queries and prints their intermediate representation.
//
// Every function picks up two leading parameters, `cont` and `$state`, and
// finishes by returning a zero-argument thunk instead of making a tail call.
// `sample` and `observe` compile to checkpoint constructors that hand
// control to the inference algorithm.

use anglican::compiler::ir::Ir;
use anglican::program::load_program;
use anglican::value::Value;

const SOURCE: &str = r#"
(defquery add
  (fn [x y] (+ x y)))

(defquery pick-a-coin
  (let [p (if (sample (flip 0.5)) 0.3 0.7)]
    (observe (flip p) true)
    p))

(defquery stable-noise
  (let [noise (mem (fn [k] (sample (normal 0.0 1.0))))]
    (- (noise :a) (noise :a))))
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = load_program(SOURCE)?;
    for (name, query) in &program.queries {
        let Value::Closure(closure) = query else {
            continue;
        };
        println!(";; {name}");
        println!("{}", Ir::Lambda(closure.lambda.clone()).pretty());
        println!();
    }
    Ok(())
}
