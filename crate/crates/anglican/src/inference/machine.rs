//! Interpreter for compiled IR.
//!
//! Trivial nodes evaluate to values directly; tail nodes produce the next
//! `Step`. The interpreter's own recursion depth is bounded by the size of
//! the largest compiled expression, not by how long the program runs,
//! because every function body suspends itself behind a thunk. A
//! thread-local high-water mark records the deepest host recursion seen so
//! tests can hold that bound in place.

use std::cell::Cell;
use std::sync::Arc;

use crate::compiler::ir::{bind_params, bind_pattern, runtime_gensym, Closure, Env, Ir};
use crate::inference::{Checkpoint, Step};
use crate::runtime::state::State;
use crate::runtime::{runtime_bail, RuntimeError};
use crate::value::{NativeCont, Value};

thread_local! {
    static DEPTH: Cell<usize> = const { Cell::new(0) };
    static HIGH_WATER: Cell<usize> = const { Cell::new(0) };
}

/// Deepest interpreter recursion observed on this thread since the last reset.
pub fn stack_high_water() -> usize {
    HIGH_WATER.with(|h| h.get())
}

pub fn reset_stack_high_water() {
    HIGH_WATER.with(|h| h.set(0));
}

struct DepthGuard;

impl DepthGuard {
    fn enter() -> Self {
        DEPTH.with(|d| {
            let n = d.get() + 1;
            d.set(n);
            HIGH_WATER.with(|h| {
                if n > h.get() {
                    h.set(n);
                }
            });
        });
        DepthGuard
    }
}

impl Drop for DepthGuard {
    fn drop(&mut self) {
        DEPTH.with(|d| d.set(d.get() - 1));
    }
}

pub fn eval_triv(ir: &Ir, env: &Env) -> Result<Value, RuntimeError> {
    match ir {
        Ir::Const(v) => Ok(v.clone()),
        Ir::Var(s) => env
            .get(s)
            .ok_or_else(|| RuntimeError::new(format!("undefined symbol: {s}"))),
        Ir::Prim { f, args, .. } => {
            let vals: Vec<Value> = args
                .iter()
                .map(|a| eval_triv(a, env))
                .collect::<Result<_, _>>()?;
            f(&vals)
        }
        Ir::Lambda(l) => Ok(Value::Closure(Arc::new(Closure::new(
            l.clone(),
            env.clone(),
        )))),
        Ir::Gensym { prefix } => Ok(Value::Sym(runtime_gensym(prefix))),
        other => runtime_bail!("internal: tail form in value position: {other}"),
    }
}

fn expect_state(v: Value) -> Result<State, RuntimeError> {
    match v {
        Value::State(s) => Ok(*s),
        other => runtime_bail!(
            "internal: expected the threaded state, got {}",
            other.type_name()
        ),
    }
}

pub fn exec_tail(ir: &Ir, env: &Env) -> Result<Step, RuntimeError> {
    let _guard = DepthGuard::enter();
    match ir {
        Ir::ContCall { cont, value, state } => {
            let c = eval_triv(cont, env)?;
            let v = eval_triv(value, env)?;
            let s = expect_state(eval_triv(state, env)?)?;
            apply_cont(c, v, s)
        }
        Ir::CpsCall {
            f,
            cont,
            state,
            args,
        } => {
            let fv = eval_triv(f, env)?;
            let c = eval_triv(cont, env)?;
            let s = expect_state(eval_triv(state, env)?)?;
            let argv: Vec<Value> = args
                .iter()
                .map(|a| eval_triv(a, env))
                .collect::<Result<_, _>>()?;
            apply_cps(fv, c, s, argv)
        }
        Ir::CpsApply {
            f,
            cont,
            state,
            args,
            spread,
        } => {
            let fv = eval_triv(f, env)?;
            let c = eval_triv(cont, env)?;
            let s = expect_state(eval_triv(state, env)?)?;
            let mut argv: Vec<Value> = args
                .iter()
                .map(|a| eval_triv(a, env))
                .collect::<Result<_, _>>()?;
            let spread_v = eval_triv(spread, env)?;
            match &spread_v {
                Value::Nil => {}
                other => match other.as_seq() {
                    Some(items) => argv.extend_from_slice(items),
                    None => runtime_bail!(
                        "apply: final argument must be a sequence, got {}",
                        other.type_name()
                    ),
                },
            }
            apply_cps(fv, c, s, argv)
        }
        Ir::If { cond, then, els } => {
            if eval_triv(cond, env)?.is_truthy() {
                exec_tail(then, env)
            } else {
                exec_tail(els, env)
            }
        }
        Ir::Let { bindings, body } => {
            let mut env = env.clone();
            for (pat, init) in bindings {
                let v = eval_triv(init, &env)?;
                let mut out = Vec::new();
                bind_pattern(pat, v, &mut out)?;
                env = env.extend(out);
            }
            exec_tail(body, &env)
        }
        Ir::Thunk(body) => {
            let body = body.clone();
            let env = env.clone();
            Ok(Step::Thunk(Box::new(move || exec_tail(&body, &env))))
        }
        Ir::Sample {
            id,
            dist,
            cont,
            state,
        } => {
            let idv = eval_triv(id, env)?;
            let dv = eval_triv(dist, env)?;
            let c = eval_triv(cont, env)?;
            let s = expect_state(eval_triv(state, env)?)?;
            let Value::Dist(d) = dv else {
                runtime_bail!("sample: expected a distribution, got {}", dv.type_name());
            };
            Ok(Step::Checkpoint(Checkpoint::Sample {
                id: idv,
                dist: d,
                cont: c,
                state: s,
            }))
        }
        Ir::Observe {
            id,
            dist,
            value,
            cont,
            state,
        } => {
            let idv = eval_triv(id, env)?;
            let dv = eval_triv(dist, env)?;
            let v = eval_triv(value, env)?;
            let c = eval_triv(cont, env)?;
            let s = expect_state(eval_triv(state, env)?)?;
            let Value::Dist(d) = dv else {
                runtime_bail!("observe: expected a distribution, got {}", dv.type_name());
            };
            Ok(Step::Checkpoint(Checkpoint::Observe {
                id: idv,
                dist: d,
                value: v,
                cont: c,
                state: s,
            }))
        }
        other => runtime_bail!("internal: value form in tail position: {other}"),
    }
}

fn apply_closure(closure_value: &Value, args: Vec<Value>) -> Result<Step, RuntimeError> {
    let Value::Closure(cl) = closure_value else {
        runtime_bail!("internal: apply_closure on {}", closure_value.type_name());
    };
    let mut binds = Vec::with_capacity(args.len() + 1);
    if let Some(name) = &cl.lambda.name {
        binds.push((name.clone(), closure_value.clone()));
    }
    bind_params(&cl.lambda, args, &mut binds)?;
    let env = cl.env.extend(binds);
    exec_tail(&cl.lambda.body, &env)
}

/// Hands a value and the state to a continuation, native or compiled.
pub fn apply_cont(cont: Value, value: Value, state: State) -> Result<Step, RuntimeError> {
    match &cont {
        Value::Cont(nc) => (nc.0)(value, state),
        Value::Closure(_) => apply_closure(&cont, vec![value, Value::state(state)]),
        other => runtime_bail!("cannot continue into {}", other.type_name()),
    }
}

/// Calls a function value under the CPS protocol. Native primitives are
/// applied directly and their result forwarded to the continuation.
pub fn apply_cps(
    f: Value,
    cont: Value,
    state: State,
    args: Vec<Value>,
) -> Result<Step, RuntimeError> {
    match &f {
        Value::Closure(_) => {
            let mut all = Vec::with_capacity(args.len() + 2);
            all.push(cont);
            all.push(Value::state(state));
            all.extend(args);
            apply_closure(&f, all)
        }
        Value::Prim(p) => {
            let out = (p.f)(&args)?;
            apply_cont(cont, out, state)
        }
        other => runtime_bail!("cannot call {} as a function", other.type_name()),
    }
}

fn result_cont() -> Value {
    Value::Cont(NativeCont::new(|v, s| {
        Ok(Step::Checkpoint(Checkpoint::Result {
            state: s.with_result(v),
        }))
    }))
}

/// Builds the first step of a query run: the entry closure applied to the
/// terminal continuation, a fresh state, and the query argument if any.
pub fn initial_step(entry: &Value, arg: Option<Value>) -> Result<Step, RuntimeError> {
    let Value::Closure(cl) = entry else {
        runtime_bail!("query entry is not a function, got {}", entry.type_name());
    };
    let user_params = cl.lambda.params.required.len().saturating_sub(2);
    let args = match (user_params, arg) {
        (0, None) => Vec::new(),
        (0, Some(_)) => runtime_bail!("query takes no argument but one was supplied"),
        (1, None) => vec![Value::Nil],
        (1, Some(v)) => vec![v],
        (n, _) => runtime_bail!("query takes at most one argument, found {n} parameters"),
    };
    apply_cps(entry.clone(), result_cont(), State::initial(), args)
}

/// Runs a step to completion in a context where checkpoints are illegal,
/// as in top-level value definitions.
pub fn eval_deterministic(start: Step) -> Result<Value, RuntimeError> {
    match crate::inference::trampoline(start)? {
        Checkpoint::Sample { .. } => {
            runtime_bail!("sample is not allowed in a deterministic definition")
        }
        Checkpoint::Observe { .. } => {
            runtime_bail!("observe is not allowed in a deterministic definition")
        }
        Checkpoint::Result { state } => Ok(state.result().clone()),
    }
}
