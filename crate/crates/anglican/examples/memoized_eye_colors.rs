// Memoized random functions: stable within a run, fresh across runs.
//
// The eye-colors query memoizes a random color assignment, so asking for
// bill's color twice in one execution must return the same draw. The memo
// table lives in the threaded program state, never in shared mutable
// storage, so independent executions draw independently.

use std::fs;

use anglican::inference::{infer, Algorithm, InferOptions};
use anglican::program::load_program;
use anglican::value::{value_eq, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/queries/eye_color.anglican");
    let program = load_program(&fs::read_to_string(path)?)?;
    let query = program.single_query().expect("one query");

    let runs = 1000;
    let opts = InferOptions {
        seed: 42,
        ..InferOptions::default()
    };
    let bill = Value::key("bill");
    let again = Value::key("bill-again");
    let brown = Value::sym("brown");

    let mut stable = 0;
    let mut brown_runs = 0;
    for state in infer(Algorithm::Importance, query, None, &opts).take(runs) {
        let state = state?;
        let first = state.result().get(&bill).expect(":bill");
        let second = state.result().get(&again).expect(":bill-again");
        if value_eq(first, second) {
            stable += 1;
        }
        if value_eq(first, &brown) {
            brown_runs += 1;
        }
    }

    println!("runs where bill's color held steady   {stable}/{runs}");
    println!("runs where bill's eyes were brown     {brown_runs}/{runs}");
    Ok(())
}
