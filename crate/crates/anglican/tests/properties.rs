mod common;

use anglican::compiler::cps_of_expression;
use anglican::compiler::ir::Ir;
use anglican::inference::AddressCursor;
use anglican::program::load_program;
use anglican::reader::{read_form, read_forms, Form};
use anglican::runtime::dist::Distribution;
use anglican::runtime::primitives;
use anglican::runtime::process::RandomProcess;
use anglican::runtime::state::State;
use anglican::stat;
use anglican::value::{format_real, Keyword, Value};
use proptest::prelude::*;

fn atom() -> impl Strategy<Value = Form> {
    let word = "[a-z][a-z0-9?+*-]{0,8}";
    prop_oneof![
        Just(Form::Nil),
        any::<bool>().prop_map(Form::Bool),
        any::<i64>().prop_map(Form::Int),
        prop::num::f64::NORMAL.prop_map(Form::Real),
        word.prop_filter("reads as a literal", |s| !matches!(
            s.as_str(),
            "nil" | "true" | "false"
        ))
        .prop_map(|s| Form::sym(&s)),
        word.prop_map(|s| Form::Key(Keyword::new(s))),
        "[ !#-\\[\\]-~]{0,12}".prop_map(Form::Str),
    ]
}

fn form() -> impl Strategy<Value = Form> {
    atom().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Form::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Form::Vector),
            prop::collection::btree_map(any::<i64>(), inner.clone(), 0..4).prop_map(|m| {
                Form::Map(m.into_iter().map(|(k, v)| (Form::Int(k), v)).collect())
            }),
            prop::collection::btree_set(any::<i64>(), 0..4)
                .prop_map(|s| Form::Set(s.into_iter().map(Form::Int).collect())),
            inner.prop_map(|f| Form::Quoted(Box::new(f))),
        ]
    })
}

proptest! {
    #[test]
    fn reading_never_panics(src in any::<String>()) {
        let _ = read_forms(&src);
    }

    #[test]
    fn printed_forms_read_back_unchanged(f in form()) {
        let printed = f.to_string();
        let back = read_form(&printed)
            .unwrap_or_else(|e| panic!("printed form {printed:?} failed to read: {e}"));
        prop_assert_eq!(back, f);
    }

    #[test]
    fn printed_reals_read_back_to_the_same_bits(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let printed = format_real(x);
        let Form::Real(back) = read_form(&printed).unwrap() else {
            return Err(TestCaseError::fail(format!("{printed:?} did not read as a real")));
        };
        prop_assert_eq!(back.to_bits(), x.to_bits(), "{}", printed);
    }

    #[test]
    fn compilation_is_deterministic(f in form()) {
        let quoted = Form::Quoted(Box::new(f));
        let once = cps_of_expression(&quoted, "cont").unwrap().to_string();
        let again = cps_of_expression(&quoted, "cont").unwrap().to_string();
        prop_assert_eq!(once, again);
    }

    #[test]
    fn discrete_mass_sums_to_one(
        p in 0.001f64..0.999,
        weights in prop::collection::vec(0.01f64..10.0, 1..6),
        lo in -5i64..5,
        span in 1i64..10,
    ) {
        let cases: Vec<(Distribution, Vec<Value>)> = vec![
            (Distribution::flip(p).unwrap(), vec![Value::Bool(true), Value::Bool(false)]),
            (Distribution::bernoulli(p).unwrap(), vec![Value::Int(0), Value::Int(1)]),
            (
                Distribution::discrete(weights.clone()).unwrap(),
                (0..weights.len() as i64).map(Value::Int).collect(),
            ),
            (
                Distribution::categorical(
                    weights.iter().enumerate().map(|(i, w)| (Value::key(format!("k{i}")), *w)).collect(),
                ).unwrap(),
                (0..weights.len()).map(|i| Value::key(format!("k{i}"))).collect(),
            ),
            (
                Distribution::uniform_discrete(lo, lo + span).unwrap(),
                (lo..lo + span).map(Value::Int).collect(),
            ),
        ];
        for (dist, support) in cases {
            let total: f64 = support.iter().map(|v| dist.observe_star(v).exp()).sum();
            prop_assert!(
                (total - 1.0).abs() < 1e-9,
                "{} sums to {total}",
                dist.name()
            );
        }
    }

    #[test]
    fn absorbing_coin_outcomes_matches_the_posterior_mean(
        a in prop::sample::select(vec![0.5f64, 1.0, 1.5, 2.0, 3.0, 5.0]),
        b in prop::sample::select(vec![0.5f64, 1.0, 2.0, 4.0]),
        outcomes in prop::collection::vec(0i64..2, 0..12),
    ) {
        let mut process = RandomProcess::beta_bernoulli(a, b).unwrap();
        for o in &outcomes {
            process = process.absorb(&Value::Int(*o)).unwrap();
        }
        let ones = outcomes.iter().filter(|o| **o == 1).count() as f64;
        let n = outcomes.len() as f64;
        let Distribution::Bernoulli { p } = process.produce().unwrap() else {
            return Err(TestCaseError::fail("produce did not yield a coin"));
        };
        prop_assert_eq!(p, (a + ones) / (a + b + n));
    }

    #[test]
    fn derived_states_leave_the_original_untouched(
        delta in -10.0f64..10.0,
        n in 1i64..100,
    ) {
        let base = State::initial().add_log_weight(0.5).with_result(Value::Int(7));
        let snapshot = base.clone();
        let _ = base.add_log_weight(delta);
        let _ = base.with_result(Value::Int(n));
        let _ = base.set_mem(Value::key("m"), Value::list(vec![Value::Int(n)]), Value::Int(1));
        let store = primitives::store_primitive();
        let _ = (store.f)(&[Value::state(base.clone()), Value::key("k"), Value::Int(n)]).unwrap();
        prop_assert!(base.structural_eq(&snapshot));
    }

    #[test]
    fn identical_checkpoint_sequences_get_identical_addresses(
        ids in prop::collection::vec(0u8..4, 0..30),
        padding in 1u64..20,
    ) {
        let (mut c1, mut c2) = (AddressCursor::new(padding), AddressCursor::new(padding));
        for i in &ids {
            let id = Value::sym(["A", "B", "C", "D"][*i as usize]);
            prop_assert_eq!(c1.advance(&id), c2.advance(&id));
        }
    }

    #[test]
    fn every_address_continues_a_run_or_starts_on_a_padding_multiple(
        ids in prop::collection::vec(0u8..4, 1..40),
        padding in 1u64..20,
    ) {
        let mut cursor = AddressCursor::new(padding);
        let mut previous: Option<(Value, u64)> = None;
        for i in &ids {
            let id = Value::sym(["A", "B", "C", "D"][*i as usize]);
            let addr = cursor.advance(&id);
            let continues = matches!(
                &previous,
                Some((last, count)) if anglican::value::value_eq(last, &id) && addr.count == count + 1
            );
            prop_assert!(
                continues || addr.count.is_multiple_of(padding),
                "address {addr} neither continues its run nor starts a padded block"
            );
            previous = Some((id, addr.count));
        }
    }

    #[test]
    fn inserting_a_fresh_checkpoint_at_a_run_boundary_shifts_nothing_else(
        ids in prop::collection::vec(0u8..4, 1..30),
        at in 0usize..31,
        padding in 1u64..20,
    ) {
        let names = ["A", "B", "C", "D"];
        let at = at.min(ids.len());
        // Only boundaries between differing identifiers qualify; inside a
        // run the insertion would split it and renumber its tail.
        if at > 0 && at < ids.len() && ids[at - 1] == ids[at] {
            return Ok(());
        }
        let mut edited: Vec<Value> = ids.iter().map(|i| Value::sym(names[*i as usize])).collect();
        edited.insert(at, Value::sym("X"));

        let mut plain_cursor = AddressCursor::new(padding);
        let plain: Vec<_> =
            ids.iter().map(|i| plain_cursor.advance(&Value::sym(names[*i as usize]))).collect();
        let mut edited_cursor = AddressCursor::new(padding);
        let withx: Vec<_> = edited.iter().map(|id| edited_cursor.advance(id)).collect();

        prop_assert_eq!(withx[at].count, 0, "first appearance starts at zero");
        for (i, addr) in plain.iter().enumerate() {
            let shifted = if i < at { &withx[i] } else { &withx[i + 1] };
            prop_assert_eq!(addr, shifted, "position {} moved after inserting at {}", i, at);
        }
    }

    #[test]
    fn run_length_changes_under_the_padding_do_not_reach_later_checkpoints(
        len_a in 1usize..=16,
        len_b in 1usize..=16,
        tail in prop::collection::vec(0u8..3, 1..20),
    ) {
        let names = ["B", "C", "D"];
        let addresses = |lead: usize| {
            let mut cursor = AddressCursor::new(16);
            for _ in 0..lead {
                cursor.advance(&Value::sym("A"));
            }
            tail.iter()
                .map(|i| cursor.advance(&Value::sym(names[*i as usize])))
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(addresses(len_a), addresses(len_b));
    }

    #[test]
    fn weighted_mean_ignores_a_constant_log_weight_shift(
        samples in prop::collection::vec((-100.0f64..100.0, -5.0f64..5.0), 1..40),
        shift in -200.0f64..200.0,
    ) {
        let shifted: Vec<(f64, f64)> = samples.iter().map(|(v, w)| (*v, w + shift)).collect();
        let a = stat::weighted_mean(&samples).unwrap();
        let b = stat::weighted_mean(&shifted).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn empirical_probability_stays_in_the_unit_interval(
        samples in prop::collection::vec((any::<i64>(), -5.0f64..5.0), 1..40),
    ) {
        let p = stat::empirical_probability(&samples, |v| v % 3 == 0).unwrap();
        prop_assert!((0.0..=1.0).contains(&p), "{p}");
    }

    #[test]
    fn effective_sample_size_lies_between_one_and_n(
        log_weights in prop::collection::vec(-30.0f64..30.0, 1..60),
    ) {
        let n = log_weights.len() as f64;
        let ess = stat::ess(&log_weights).unwrap();
        prop_assert!(ess >= 1.0 - 1e-9 && ess <= n + 1e-9, "ess {ess} for n {n}");
    }

    #[test]
    fn log_sum_exp_matches_the_direct_sum_where_it_is_stable(
        xs in prop::collection::vec(-20.0f64..20.0, 1..30),
    ) {
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        prop_assert!((stat::log_sum_exp(&xs) - direct).abs() < 1e-9);
    }

    #[test]
    fn log_sum_exp_survives_extreme_magnitudes(offset in 500.0f64..5000.0) {
        let xs = [offset, offset + (2.0f64).ln()];
        let expected = offset + (3.0f64).ln();
        prop_assert!((stat::log_sum_exp(&xs) - expected).abs() < 1e-9);
        let ys = [-offset, -offset];
        prop_assert!((stat::log_sum_exp(&ys) - (-offset + (2.0f64).ln())).abs() < 1e-9);
    }
}

#[test]
fn loading_the_same_source_compiles_identical_code() {
    let source = include_str!("../queries/deli.anglican");
    let render = || {
        let program = load_program(source).unwrap();
        program
            .queries
            .iter()
            .map(|(name, q)| {
                let Value::Closure(c) = q else {
                    panic!("{name} is not a closure")
                };
                Ir::Lambda(c.lambda.clone()).pretty()
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    assert_eq!(render(), render());
}

#[test]
fn repeated_runs_of_one_loaded_query_agree() {
    let source = "(defquery q (let [a (sample (flip 0.5))] (observe (flip 0.7) true) [a (retrieve :missing)]))";
    let program = load_program(source).unwrap();
    let (_, entry) = program.queries.last().unwrap();
    let run = || {
        let start = anglican::inference::machine::initial_step(entry, None).unwrap();
        let mut handler = Scripted {
            values: vec![Value::Bool(true)].into(),
        };
        anglican::inference::run_with_handler(&mut handler, start, 16).unwrap()
    };
    let (first, second) = (run(), run());
    assert!(first.structural_eq(&second));
}

struct Scripted {
    values: std::collections::VecDeque<Value>,
}

impl anglican::inference::Handler for Scripted {
    fn on_sample(
        &mut self,
        _addr: &anglican::inference::Address,
        _dist: &Distribution,
        state: State,
    ) -> Result<(Value, State), anglican::runtime::RuntimeError> {
        Ok((self.values.pop_front().expect("script exhausted"), state))
    }

    fn on_observe(
        &mut self,
        _addr: &anglican::inference::Address,
        dist: &Distribution,
        value: &Value,
        state: State,
    ) -> Result<State, anglican::runtime::RuntimeError> {
        Ok(state.add_log_weight(dist.observe_star(value)))
    }
}
