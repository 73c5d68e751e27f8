mod common;

use common::{compile_one, ir_matches, CPS_LISTINGS};

#[test]
fn expressions_compile_to_the_pinned_listings() {
    let mut failures = Vec::new();
    for (source, expected) in CPS_LISTINGS {
        if let Err(why) = ir_matches(&compile_one(source), expected) {
            failures.push(format!("{source}\n  {why}"));
        }
    }
    assert!(
        failures.is_empty(),
        "listing mismatches:\n{}",
        failures.join("\n")
    );
}

#[test]
fn continuation_bodies_are_shared_across_branches() {
    // The follow-up of a branching expression must be emitted once and
    // bound to a name, not copied into every arm.
    for depth in [1usize, 4, 16] {
        let mut nested = String::from("0");
        for i in 0..depth {
            nested = format!("(if c{i} {i} {nested})");
        }
        let compiled = compile_one(&format!("(+ {nested} 424242)"));
        let copies = compiled.matches("424242").count();
        assert_eq!(
            copies, 1,
            "continuation duplicated at depth {depth}:\n{compiled}"
        );
    }
}

#[test]
fn compiled_size_grows_linearly_with_branch_depth() {
    let size = |depth: usize| {
        let mut nested = String::from("0");
        for i in 0..depth {
            nested = format!("(if c{i} {i} {nested})");
        }
        compile_one(&format!("(list {nested} 'tail)")).len()
    };
    let (small, large) = (size(2), size(42));
    assert!(
        large - small <= 40 * 160,
        "compiled output grows faster than linearly: {small} bytes at depth 2, {large} at depth 42"
    );
}

#[test]
fn placeholder_matching_rejects_shape_changes() {
    assert!(ir_matches("(cont 1 $state)", "(cont 1 $state)").is_ok());
    assert!(ir_matches("(f V1 V1)", "(f ?a ?a)").is_ok());
    assert!(ir_matches("(f V1 V2)", "(f ?a ?a)").is_err());
    assert!(ir_matches("(f V1 V1)", "(f ?a ?b)").is_err());
    assert!(ir_matches("(f 'V1)", "(f ?a)").is_err());
    assert!(ir_matches("(f 'V1)", "(f '?a)").is_ok());
    assert!(ir_matches("(f x)", "(f x y)").is_err());
    assert!(ir_matches("(f x y)", "(f x)").is_err());
}
