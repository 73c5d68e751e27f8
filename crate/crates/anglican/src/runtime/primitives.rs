//! Native primitives callable from compiled code.
//!
//! Every function here is pure and deterministic: no randomness, no shared
//! mutation. That is what lets the compiler call them directly instead of
//! threading a continuation through them. Higher-order functions (map, reduce,
//! filter, some, repeatedly, comp, partial) deliberately do not appear here;
//! their arguments may contain checkpoints, so they live in the bootstrap
//! library compiled alongside user code.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::runtime::dist::Distribution;
use crate::runtime::process::RandomProcess;
use crate::runtime::{runtime_bail, RuntimeError};
use crate::value::{value_eq, PrimFn, Primitive, Symbol, Value};

type R = Result<Value, RuntimeError>;

fn need(name: &str, args: &[Value], n: usize) -> Result<(), RuntimeError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(RuntimeError::new(format!(
            "{name}: expected {n} arguments, got {}",
            args.len()
        )))
    }
}

fn num(name: &str, v: &Value) -> Result<f64, RuntimeError> {
    v.as_f64().ok_or_else(|| {
        RuntimeError::new(format!("{name}: expected a number, got {}", v.type_name()))
    })
}

fn int(name: &str, v: &Value) -> Result<i64, RuntimeError> {
    v.as_int().ok_or_else(|| {
        RuntimeError::new(format!(
            "{name}: expected an integer, got {}",
            v.type_name()
        ))
    })
}

fn seq<'a>(name: &str, v: &'a Value) -> Result<&'a [Value], RuntimeError> {
    v.as_seq().ok_or_else(|| {
        RuntimeError::new(format!(
            "{name}: expected a sequence, got {}",
            v.type_name()
        ))
    })
}

#[derive(Clone, Copy)]
enum Num {
    I(i64),
    R(f64),
}

fn as_num(name: &str, v: &Value) -> Result<Num, RuntimeError> {
    match v {
        Value::Int(i) => Ok(Num::I(*i)),
        Value::Real(r) => Ok(Num::R(*r)),
        other => runtime_bail!("{name}: expected a number, got {}", other.type_name()),
    }
}

fn num_value(n: Num) -> Value {
    match n {
        Num::I(i) => Value::Int(i),
        Num::R(r) => Value::Real(r),
    }
}

fn arith(
    name: &str,
    a: Num,
    b: Num,
    fi: fn(i64, i64) -> Option<i64>,
    fr: fn(f64, f64) -> f64,
) -> Result<Num, RuntimeError> {
    match (a, b) {
        (Num::I(x), Num::I(y)) => match fi(x, y) {
            Some(z) => Ok(Num::I(z)),
            None => runtime_bail!("{name}: integer overflow"),
        },
        (x, y) => {
            let (x, y) = (num_to_f64(x), num_to_f64(y));
            Ok(Num::R(fr(x, y)))
        }
    }
}

fn num_to_f64(n: Num) -> f64 {
    match n {
        Num::I(i) => i as f64,
        Num::R(r) => r,
    }
}

fn prim_add(args: &[Value]) -> R {
    let mut acc = Num::I(0);
    for v in args {
        acc = arith("+", acc, as_num("+", v)?, i64::checked_add, |a, b| a + b)?;
    }
    Ok(num_value(acc))
}

fn prim_mul(args: &[Value]) -> R {
    let mut acc = Num::I(1);
    for v in args {
        acc = arith("*", acc, as_num("*", v)?, i64::checked_mul, |a, b| a * b)?;
    }
    Ok(num_value(acc))
}

fn prim_sub(args: &[Value]) -> R {
    match args {
        [] => runtime_bail!("-: expected at least 1 argument"),
        [v] => match as_num("-", v)? {
            Num::I(i) => Ok(Value::Int(
                i.checked_neg()
                    .ok_or_else(|| RuntimeError::new("-: integer overflow"))?,
            )),
            Num::R(r) => Ok(Value::Real(-r)),
        },
        [first, rest @ ..] => {
            let mut acc = as_num("-", first)?;
            for v in rest {
                acc = arith("-", acc, as_num("-", v)?, i64::checked_sub, |a, b| a - b)?;
            }
            Ok(num_value(acc))
        }
    }
}

/// Integer division stays an integer only when exact; otherwise promotes to real.
fn div2(name: &str, a: Num, b: Num) -> Result<Num, RuntimeError> {
    match (a, b) {
        (Num::I(x), Num::I(y)) => {
            if y == 0 {
                runtime_bail!("{name}: division by zero");
            }
            if x % y == 0 {
                Ok(Num::I(x / y))
            } else {
                Ok(Num::R(x as f64 / y as f64))
            }
        }
        (x, y) => Ok(Num::R(num_to_f64(x) / num_to_f64(y))),
    }
}

fn prim_div(args: &[Value]) -> R {
    match args {
        [] => runtime_bail!("/: expected at least 1 argument"),
        [v] => div2("/", Num::I(1), as_num("/", v)?).map(num_value),
        [first, rest @ ..] => {
            let mut acc = as_num("/", first)?;
            for v in rest {
                acc = div2("/", acc, as_num("/", v)?)?;
            }
            Ok(num_value(acc))
        }
    }
}

fn prim_inc(args: &[Value]) -> R {
    need("inc", args, 1)?;
    prim_add(&[args[0].clone(), Value::Int(1)])
}

fn prim_dec(args: &[Value]) -> R {
    need("dec", args, 1)?;
    prim_sub(&[args[0].clone(), Value::Int(1)])
}

fn prim_quot(args: &[Value]) -> R {
    need("quot", args, 2)?;
    let (a, b) = (int("quot", &args[0])?, int("quot", &args[1])?);
    if b == 0 {
        runtime_bail!("quot: division by zero");
    }
    Ok(Value::Int(a / b))
}

fn prim_rem(args: &[Value]) -> R {
    need("rem", args, 2)?;
    let (a, b) = (int("rem", &args[0])?, int("rem", &args[1])?);
    if b == 0 {
        runtime_bail!("rem: division by zero");
    }
    Ok(Value::Int(a % b))
}

fn prim_mod(args: &[Value]) -> R {
    need("mod", args, 2)?;
    let (a, b) = (int("mod", &args[0])?, int("mod", &args[1])?);
    if b == 0 {
        runtime_bail!("mod: division by zero");
    }
    let m = a % b;
    Ok(Value::Int(if m != 0 && (m < 0) != (b < 0) {
        m + b
    } else {
        m
    }))
}

fn pick(args: &[Value], name: &str, better: fn(f64, f64) -> bool) -> R {
    if args.is_empty() {
        runtime_bail!("{name}: expected at least 1 argument");
    }
    let mut best = args[0].clone();
    let mut best_n = num(name, &best)?;
    for v in &args[1..] {
        let n = num(name, v)?;
        if better(n, best_n) {
            best = v.clone();
            best_n = n;
        }
    }
    Ok(best)
}

fn prim_min(args: &[Value]) -> R {
    pick(args, "min", |a, b| a < b)
}

fn prim_max(args: &[Value]) -> R {
    pick(args, "max", |a, b| a > b)
}

fn prim_abs(args: &[Value]) -> R {
    need("abs", args, 1)?;
    match as_num("abs", &args[0])? {
        Num::I(i) => Ok(Value::Int(i.abs())),
        Num::R(r) => Ok(Value::Real(r.abs())),
    }
}

macro_rules! real_prim {
    ($fn_name:ident, $name:literal, $f:expr) => {
        fn $fn_name(args: &[Value]) -> R {
            need($name, args, 1)?;
            let x = num($name, &args[0])?;
            let f: fn(f64) -> f64 = $f;
            Ok(Value::Real(f(x)))
        }
    };
}

real_prim!(prim_exp, "exp", f64::exp);
real_prim!(prim_log, "log", f64::ln);
real_prim!(prim_sqrt, "sqrt", f64::sqrt);
real_prim!(prim_sin, "sin", f64::sin);
real_prim!(prim_cos, "cos", f64::cos);
real_prim!(prim_tan, "tan", f64::tan);
real_prim!(prim_floor, "floor", f64::floor);
real_prim!(prim_ceil, "ceil", f64::ceil);

fn prim_pow(args: &[Value]) -> R {
    need("pow", args, 2)?;
    Ok(Value::Real(
        num("pow", &args[0])?.powf(num("pow", &args[1])?),
    ))
}

fn prim_round(args: &[Value]) -> R {
    need("round", args, 1)?;
    Ok(Value::Int(num("round", &args[0])?.round() as i64))
}

fn prim_eq(args: &[Value]) -> R {
    if args.is_empty() {
        runtime_bail!("=: expected at least 1 argument");
    }
    Ok(Value::Bool(args.windows(2).all(|w| value_eq(&w[0], &w[1]))))
}

fn prim_neq(args: &[Value]) -> R {
    match prim_eq(args)? {
        Value::Bool(b) => Ok(Value::Bool(!b)),
        _ => unreachable!(),
    }
}

fn cmp_chain(name: &str, args: &[Value], ok: fn(f64, f64) -> bool) -> R {
    if args.is_empty() {
        runtime_bail!("{name}: expected at least 1 argument");
    }
    let mut prev = num(name, &args[0])?;
    for v in &args[1..] {
        let cur = num(name, v)?;
        if !ok(prev, cur) {
            return Ok(Value::Bool(false));
        }
        prev = cur;
    }
    Ok(Value::Bool(true))
}

fn prim_lt(args: &[Value]) -> R {
    cmp_chain("<", args, |a, b| a < b)
}
fn prim_gt(args: &[Value]) -> R {
    cmp_chain(">", args, |a, b| a > b)
}
fn prim_le(args: &[Value]) -> R {
    cmp_chain("<=", args, |a, b| a <= b)
}
fn prim_ge(args: &[Value]) -> R {
    cmp_chain(">=", args, |a, b| a >= b)
}

fn prim_not(args: &[Value]) -> R {
    need("not", args, 1)?;
    Ok(Value::Bool(!args[0].is_truthy()))
}

macro_rules! pred_prim {
    ($fn_name:ident, $name:literal, $pat:pat) => {
        fn $fn_name(args: &[Value]) -> R {
            need($name, args, 1)?;
            Ok(Value::Bool(matches!(&args[0], $pat)))
        }
    };
}

pred_prim!(prim_nil_p, "nil?", Value::Nil);
pred_prim!(prim_true_p, "true?", Value::Bool(true));
pred_prim!(prim_false_p, "false?", Value::Bool(false));
pred_prim!(prim_number_p, "number?", Value::Int(_) | Value::Real(_));
pred_prim!(prim_integer_p, "integer?", Value::Int(_));
pred_prim!(prim_float_p, "float?", Value::Real(_));
pred_prim!(prim_string_p, "string?", Value::Str(_));
pred_prim!(prim_symbol_p, "symbol?", Value::Sym(_));
pred_prim!(prim_keyword_p, "keyword?", Value::Key(_));
pred_prim!(prim_boolean_p, "boolean?", Value::Bool(_));
pred_prim!(prim_list_p, "list?", Value::List(_));
pred_prim!(prim_vector_p, "vector?", Value::Vector(_));
pred_prim!(prim_map_p, "map?", Value::Map(_));
pred_prim!(prim_set_p, "set?", Value::Set(_));
pred_prim!(prim_fn_p, "fn?", Value::Closure(_) | Value::Prim(_));
pred_prim!(
    prim_coll_p,
    "coll?",
    Value::List(_) | Value::Vector(_) | Value::Map(_) | Value::Set(_)
);
pred_prim!(prim_dist_p, "distribution?", Value::Dist(_));

fn prim_some_p(args: &[Value]) -> R {
    need("some?", args, 1)?;
    Ok(Value::Bool(!matches!(&args[0], Value::Nil)))
}

fn prim_zero_p(args: &[Value]) -> R {
    need("zero?", args, 1)?;
    Ok(Value::Bool(num("zero?", &args[0])? == 0.0))
}
fn prim_pos_p(args: &[Value]) -> R {
    need("pos?", args, 1)?;
    Ok(Value::Bool(num("pos?", &args[0])? > 0.0))
}
fn prim_neg_p(args: &[Value]) -> R {
    need("neg?", args, 1)?;
    Ok(Value::Bool(num("neg?", &args[0])? < 0.0))
}
fn prim_even_p(args: &[Value]) -> R {
    need("even?", args, 1)?;
    Ok(Value::Bool(int("even?", &args[0])? % 2 == 0))
}
fn prim_odd_p(args: &[Value]) -> R {
    need("odd?", args, 1)?;
    Ok(Value::Bool(int("odd?", &args[0])? % 2 != 0))
}

fn count_of(name: &str, v: &Value) -> Result<usize, RuntimeError> {
    match v {
        Value::Nil => Ok(0),
        Value::List(xs) | Value::Vector(xs) | Value::Set(xs) => Ok(xs.len()),
        Value::Map(pairs) => Ok(pairs.len()),
        Value::Str(s) => Ok(s.chars().count()),
        other => runtime_bail!("{name}: expected a collection, got {}", other.type_name()),
    }
}

fn prim_count(args: &[Value]) -> R {
    need("count", args, 1)?;
    Ok(Value::Int(count_of("count", &args[0])? as i64))
}

fn prim_empty_p(args: &[Value]) -> R {
    need("empty?", args, 1)?;
    Ok(Value::Bool(count_of("empty?", &args[0])? == 0))
}

fn prim_not_empty(args: &[Value]) -> R {
    need("not-empty", args, 1)?;
    if count_of("not-empty", &args[0])? == 0 {
        Ok(Value::Nil)
    } else {
        Ok(args[0].clone())
    }
}

fn prim_first(args: &[Value]) -> R {
    need("first", args, 1)?;
    Ok(seq("first", &args[0])?
        .first()
        .cloned()
        .unwrap_or(Value::Nil))
}

fn prim_second(args: &[Value]) -> R {
    need("second", args, 1)?;
    Ok(seq("second", &args[0])?
        .get(1)
        .cloned()
        .unwrap_or(Value::Nil))
}

fn prim_last(args: &[Value]) -> R {
    need("last", args, 1)?;
    Ok(seq("last", &args[0])?.last().cloned().unwrap_or(Value::Nil))
}

fn prim_rest(args: &[Value]) -> R {
    need("rest", args, 1)?;
    let xs = seq("rest", &args[0])?;
    Ok(Value::list(xs.get(1..).unwrap_or(&[]).to_vec()))
}

fn prim_next(args: &[Value]) -> R {
    need("next", args, 1)?;
    let xs = seq("next", &args[0])?;
    match xs.get(1..) {
        Some(tail) if !tail.is_empty() => Ok(Value::list(tail.to_vec())),
        _ => Ok(Value::Nil),
    }
}

fn prim_butlast(args: &[Value]) -> R {
    need("butlast", args, 1)?;
    let xs = seq("butlast", &args[0])?;
    if xs.len() <= 1 {
        Ok(Value::Nil)
    } else {
        Ok(Value::list(xs[..xs.len() - 1].to_vec()))
    }
}

fn prim_nth(args: &[Value]) -> R {
    if args.len() != 2 && args.len() != 3 {
        runtime_bail!("nth: expected 2 or 3 arguments, got {}", args.len());
    }
    let xs = seq("nth", &args[0])?;
    let i = int("nth", &args[1])?;
    match usize::try_from(i).ok().and_then(|i| xs.get(i)) {
        Some(v) => Ok(v.clone()),
        None => match args.get(2) {
            Some(default) => Ok(default.clone()),
            None => runtime_bail!("nth: index {i} out of bounds for length {}", xs.len()),
        },
    }
}

fn prim_cons(args: &[Value]) -> R {
    need("cons", args, 2)?;
    let tail = seq("cons", &args[1])?;
    let mut out = Vec::with_capacity(tail.len() + 1);
    out.push(args[0].clone());
    out.extend_from_slice(tail);
    Ok(Value::list(out))
}

fn prim_conj(args: &[Value]) -> R {
    if args.is_empty() {
        runtime_bail!("conj: expected at least 1 argument");
    }
    let mut coll = args[0].clone();
    for v in &args[1..] {
        coll = match coll {
            Value::Nil => Value::list(vec![v.clone()]),
            Value::List(xs) => {
                let mut out = Vec::with_capacity(xs.len() + 1);
                out.push(v.clone());
                out.extend_from_slice(&xs);
                Value::list(out)
            }
            Value::Vector(xs) => {
                let mut out = (*xs).clone();
                out.push(v.clone());
                Value::vector(out)
            }
            Value::Set(xs) => {
                let mut out = (*xs).clone();
                if !out.iter().any(|x| value_eq(x, v)) {
                    out.push(v.clone());
                }
                Value::Set(Arc::new(out))
            }
            Value::Map(pairs) => {
                let kv = seq("conj", v)?;
                if kv.len() != 2 {
                    runtime_bail!("conj: map entry must be a [key value] pair");
                }
                let mut out = (*pairs).clone();
                match out.iter_mut().find(|(k, _)| value_eq(k, &kv[0])) {
                    Some(entry) => entry.1 = kv[1].clone(),
                    None => out.push((kv[0].clone(), kv[1].clone())),
                }
                Value::Map(Arc::new(out))
            }
            other => runtime_bail!("conj: cannot conj onto {}", other.type_name()),
        };
    }
    Ok(coll)
}

fn prim_concat(args: &[Value]) -> R {
    let mut out = Vec::new();
    for v in args {
        out.extend_from_slice(seq("concat", v)?);
    }
    Ok(Value::list(out))
}

fn prim_list(args: &[Value]) -> R {
    Ok(Value::list(args.to_vec()))
}

fn prim_vector(args: &[Value]) -> R {
    Ok(Value::vector(args.to_vec()))
}

fn prim_vec(args: &[Value]) -> R {
    need("vec", args, 1)?;
    Ok(Value::vector(seq("vec", &args[0])?.to_vec()))
}

/// Coerces one collection into a set, dropping structural duplicates.
fn prim_set(args: &[Value]) -> R {
    need("set", args, 1)?;
    let xs = match &args[0] {
        Value::Set(xs) => return Ok(Value::Set(xs.clone())),
        other => seq("set", other)?,
    };
    let mut out: Vec<Value> = Vec::new();
    for v in xs {
        if !out.iter().any(|x| value_eq(x, v)) {
            out.push(v.clone());
        }
    }
    Ok(Value::Set(Arc::new(out)))
}

fn prim_hash_set(args: &[Value]) -> R {
    let mut out: Vec<Value> = Vec::new();
    for v in args {
        if !out.iter().any(|x| value_eq(x, v)) {
            out.push(v.clone());
        }
    }
    Ok(Value::Set(Arc::new(out)))
}

fn prim_hash_map(args: &[Value]) -> R {
    if !args.len().is_multiple_of(2) {
        runtime_bail!("hash-map: expected an even number of arguments");
    }
    let mut pairs: Vec<(Value, Value)> = Vec::with_capacity(args.len() / 2);
    for kv in args.chunks(2) {
        match pairs.iter_mut().find(|(k, _)| value_eq(k, &kv[0])) {
            Some(entry) => entry.1 = kv[1].clone(),
            None => pairs.push((kv[0].clone(), kv[1].clone())),
        }
    }
    Ok(Value::Map(Arc::new(pairs)))
}

fn prim_assoc(args: &[Value]) -> R {
    if args.len() < 3 || args.len().is_multiple_of(2) {
        runtime_bail!("assoc: expected a collection and key/value pairs");
    }
    let mut coll = args[0].clone();
    for kv in args[1..].chunks(2) {
        coll = match coll {
            Value::Nil => Value::Map(Arc::new(vec![(kv[0].clone(), kv[1].clone())])),
            Value::Map(pairs) => {
                let mut out = (*pairs).clone();
                match out.iter_mut().find(|(k, _)| value_eq(k, &kv[0])) {
                    Some(entry) => entry.1 = kv[1].clone(),
                    None => out.push((kv[0].clone(), kv[1].clone())),
                }
                Value::Map(Arc::new(out))
            }
            Value::Vector(xs) => {
                let i = int("assoc", &kv[0])?;
                let mut out = (*xs).clone();
                match usize::try_from(i) {
                    Ok(i) if i < out.len() => out[i] = kv[1].clone(),
                    Ok(i) if i == out.len() => out.push(kv[1].clone()),
                    _ => runtime_bail!("assoc: index {i} out of bounds for length {}", out.len()),
                }
                Value::vector(out)
            }
            other => runtime_bail!("assoc: cannot assoc onto {}", other.type_name()),
        };
    }
    Ok(coll)
}

fn prim_dissoc(args: &[Value]) -> R {
    if args.is_empty() {
        runtime_bail!("dissoc: expected at least 1 argument");
    }
    match &args[0] {
        Value::Map(pairs) => {
            let out: Vec<(Value, Value)> = pairs
                .iter()
                .filter(|(k, _)| !args[1..].iter().any(|key| value_eq(k, key)))
                .cloned()
                .collect();
            Ok(Value::Map(Arc::new(out)))
        }
        Value::Nil => Ok(Value::Nil),
        other => runtime_bail!("dissoc: expected a map, got {}", other.type_name()),
    }
}

pub(crate) fn lookup_in(coll: &Value, key: &Value) -> Option<Value> {
    match coll {
        Value::Map(pairs) => pairs
            .iter()
            .find(|(k, _)| value_eq(k, key))
            .map(|(_, v)| v.clone()),
        Value::Vector(xs) | Value::List(xs) => key
            .as_int()
            .and_then(|i| usize::try_from(i).ok())
            .and_then(|i| xs.get(i))
            .cloned(),
        Value::Set(xs) => xs.iter().find(|x| value_eq(x, key)).cloned(),
        _ => None,
    }
}

fn prim_get(args: &[Value]) -> R {
    if args.len() != 2 && args.len() != 3 {
        runtime_bail!("get: expected 2 or 3 arguments, got {}", args.len());
    }
    Ok(lookup_in(&args[0], &args[1]).unwrap_or_else(|| args.get(2).cloned().unwrap_or(Value::Nil)))
}

fn prim_contains_p(args: &[Value]) -> R {
    need("contains?", args, 2)?;
    let found = match &args[0] {
        Value::Map(pairs) => pairs.iter().any(|(k, _)| value_eq(k, &args[1])),
        Value::Set(xs) => xs.iter().any(|x| value_eq(x, &args[1])),
        Value::Vector(xs) => args[1]
            .as_int()
            .map(|i| i >= 0 && (i as usize) < xs.len())
            .unwrap_or(false),
        Value::Nil => false,
        other => runtime_bail!(
            "contains?: expected a collection, got {}",
            other.type_name()
        ),
    };
    Ok(Value::Bool(found))
}

fn prim_keys(args: &[Value]) -> R {
    need("keys", args, 1)?;
    match &args[0] {
        Value::Map(pairs) => Ok(Value::list(pairs.iter().map(|(k, _)| k.clone()).collect())),
        Value::Nil => Ok(Value::Nil),
        other => runtime_bail!("keys: expected a map, got {}", other.type_name()),
    }
}

fn prim_vals(args: &[Value]) -> R {
    need("vals", args, 1)?;
    match &args[0] {
        Value::Map(pairs) => Ok(Value::list(pairs.iter().map(|(_, v)| v.clone()).collect())),
        Value::Nil => Ok(Value::Nil),
        other => runtime_bail!("vals: expected a map, got {}", other.type_name()),
    }
}

fn prim_reverse(args: &[Value]) -> R {
    need("reverse", args, 1)?;
    let mut xs = seq("reverse", &args[0])?.to_vec();
    xs.reverse();
    Ok(Value::list(xs))
}

fn prim_distinct(args: &[Value]) -> R {
    need("distinct", args, 1)?;
    let mut out: Vec<Value> = Vec::new();
    for v in seq("distinct", &args[0])? {
        if !out.iter().any(|x| value_eq(x, v)) {
            out.push(v.clone());
        }
    }
    Ok(Value::list(out))
}

fn prim_sort(args: &[Value]) -> R {
    need("sort", args, 1)?;
    let mut xs = seq("sort", &args[0])?.to_vec();
    if xs.iter().all(|x| x.as_f64().is_some()) {
        xs.sort_by(|a, b| a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap()));
    } else if xs.iter().all(|x| matches!(x, Value::Str(_))) {
        xs.sort_by(|a, b| match (a, b) {
            (Value::Str(x), Value::Str(y)) => x.cmp(y),
            _ => unreachable!(),
        });
    } else {
        runtime_bail!("sort: expected all numbers or all strings");
    }
    Ok(Value::list(xs))
}

fn prim_range(args: &[Value]) -> R {
    let (lo, hi, step) = match args {
        [hi] => (0, int("range", hi)?, 1),
        [lo, hi] => (int("range", lo)?, int("range", hi)?, 1),
        [lo, hi, step] => (int("range", lo)?, int("range", hi)?, int("range", step)?),
        _ => runtime_bail!("range: expected 1 to 3 arguments, got {}", args.len()),
    };
    if step == 0 {
        runtime_bail!("range: step must be non-zero");
    }
    let mut out = Vec::new();
    let mut i = lo;
    while (step > 0 && i < hi) || (step < 0 && i > hi) {
        out.push(Value::Int(i));
        i += step;
    }
    Ok(Value::list(out))
}

fn prim_take(args: &[Value]) -> R {
    need("take", args, 2)?;
    let n = int("take", &args[0])?.max(0) as usize;
    let xs = seq("take", &args[1])?;
    Ok(Value::list(xs.iter().take(n).cloned().collect()))
}

fn prim_drop(args: &[Value]) -> R {
    need("drop", args, 2)?;
    let n = int("drop", &args[0])?.max(0) as usize;
    let xs = seq("drop", &args[1])?;
    Ok(Value::list(xs.iter().skip(n).cloned().collect()))
}

/// Unlike display, `str` renders strings without quotes and nil as "".
fn str_piece(v: &Value) -> String {
    match v {
        Value::Nil => String::new(),
        Value::Str(s) => s.to_string(),
        other => other.to_string(),
    }
}

fn prim_str(args: &[Value]) -> R {
    Ok(Value::string(
        args.iter().map(str_piece).collect::<String>(),
    ))
}

fn prim_name(args: &[Value]) -> R {
    need("name", args, 1)?;
    match &args[0] {
        Value::Sym(s) => Ok(Value::string(s.base_name())),
        Value::Key(k) => Ok(Value::string(k.name())),
        Value::Str(s) => Ok(Value::Str(s.clone())),
        other => runtime_bail!(
            "name: expected a symbol, keyword, or string, got {}",
            other.type_name()
        ),
    }
}

fn prim_symbol(args: &[Value]) -> R {
    need("symbol", args, 1)?;
    match &args[0] {
        Value::Str(s) => Ok(Value::sym(&**s)),
        Value::Sym(_) => Ok(args[0].clone()),
        other => runtime_bail!("symbol: expected a string, got {}", other.type_name()),
    }
}

fn prim_keyword(args: &[Value]) -> R {
    need("keyword", args, 1)?;
    match &args[0] {
        Value::Str(s) => Ok(Value::key(&**s)),
        Value::Sym(s) => Ok(Value::key(s.name())),
        Value::Key(_) => Ok(args[0].clone()),
        other => runtime_bail!(
            "keyword: expected a string or symbol, got {}",
            other.type_name()
        ),
    }
}

fn dist_value(d: Result<Distribution, RuntimeError>) -> R {
    Ok(Value::Dist(Arc::new(d?)))
}

fn prim_normal(args: &[Value]) -> R {
    need("normal", args, 2)?;
    dist_value(Distribution::normal(
        num("normal", &args[0])?,
        num("normal", &args[1])?,
    ))
}

fn prim_gamma(args: &[Value]) -> R {
    need("gamma", args, 2)?;
    dist_value(Distribution::gamma(
        num("gamma", &args[0])?,
        num("gamma", &args[1])?,
    ))
}

fn prim_beta(args: &[Value]) -> R {
    need("beta", args, 2)?;
    dist_value(Distribution::beta(
        num("beta", &args[0])?,
        num("beta", &args[1])?,
    ))
}

fn prim_flip(args: &[Value]) -> R {
    need("flip", args, 1)?;
    dist_value(Distribution::flip(num("flip", &args[0])?))
}

fn prim_bernoulli(args: &[Value]) -> R {
    need("bernoulli", args, 1)?;
    dist_value(Distribution::bernoulli(num("bernoulli", &args[0])?))
}

fn categorical_pair(v: &Value) -> Result<(Value, f64), RuntimeError> {
    let pair = seq("categorical", v)?;
    if pair.len() != 2 {
        runtime_bail!("categorical: entries must be [value weight] pairs, got {v}");
    }
    Ok((pair[0].clone(), num("categorical", &pair[1])?))
}

/// Accepts either one collection of [value weight] pairs or the pairs spread
/// as arguments.
fn prim_categorical(args: &[Value]) -> R {
    let items: Vec<(Value, f64)> = match args {
        [] => runtime_bail!("categorical: expected value-weight pairs"),
        [coll] => seq("categorical", coll)?
            .iter()
            .map(categorical_pair)
            .collect::<Result<_, _>>()?,
        pairs => pairs
            .iter()
            .map(categorical_pair)
            .collect::<Result<_, _>>()?,
    };
    dist_value(Distribution::categorical(items))
}

fn prim_discrete(args: &[Value]) -> R {
    let weights: Vec<f64> = match args {
        [] => runtime_bail!("discrete: expected weights"),
        [coll] if coll.as_seq().is_some() => seq("discrete", coll)?
            .iter()
            .map(|w| num("discrete", w))
            .collect::<Result<_, _>>()?,
        ws => ws
            .iter()
            .map(|w| num("discrete", w))
            .collect::<Result<_, _>>()?,
    };
    dist_value(Distribution::discrete(weights))
}

fn prim_uniform_discrete(args: &[Value]) -> R {
    need("uniform-discrete", args, 2)?;
    dist_value(Distribution::uniform_discrete(
        int("uniform-discrete", &args[0])?,
        int("uniform-discrete", &args[1])?,
    ))
}

fn prim_uniform_continuous(args: &[Value]) -> R {
    need("uniform-continuous", args, 2)?;
    dist_value(Distribution::uniform_continuous(
        num("uniform-continuous", &args[0])?,
        num("uniform-continuous", &args[1])?,
    ))
}

fn prim_beta_bernoulli(args: &[Value]) -> R {
    need("beta-bernoulli", args, 2)?;
    Ok(Value::Proc(Arc::new(RandomProcess::beta_bernoulli(
        num("beta-bernoulli", &args[0])?,
        num("beta-bernoulli", &args[1])?,
    )?)))
}

fn prim_produce(args: &[Value]) -> R {
    need("produce", args, 1)?;
    match &args[0] {
        Value::Proc(p) => Ok(Value::Dist(Arc::new(p.produce()?))),
        other => runtime_bail!(
            "produce: expected a random process, got {}",
            other.type_name()
        ),
    }
}

fn prim_absorb(args: &[Value]) -> R {
    need("absorb", args, 2)?;
    match &args[0] {
        Value::Proc(p) => Ok(Value::Proc(Arc::new(p.absorb(&args[1])?))),
        other => runtime_bail!(
            "absorb: expected a random process, got {}",
            other.type_name()
        ),
    }
}

fn prim_observe_star(args: &[Value]) -> R {
    need("observe*", args, 2)?;
    match &args[0] {
        Value::Dist(d) => Ok(Value::Real(d.observe_star(&args[1]))),
        other => runtime_bail!(
            "observe*: expected a distribution, got {}",
            other.type_name()
        ),
    }
}

fn state_arg<'a>(name: &str, v: &'a Value) -> Result<&'a crate::runtime::State, RuntimeError> {
    match v {
        Value::State(s) => Ok(s),
        other => runtime_bail!(
            "{name}: expected the threaded state, got {}",
            other.type_name()
        ),
    }
}

fn prim_in_mem_p(args: &[Value]) -> R {
    need("in-mem?", args, 3)?;
    Ok(Value::Bool(
        state_arg("in-mem?", &args[0])?.in_mem(&args[1], &args[2]),
    ))
}

fn prim_get_mem(args: &[Value]) -> R {
    need("get-mem", args, 3)?;
    Ok(state_arg("get-mem", &args[0])?.get_mem(&args[1], &args[2]))
}

fn prim_set_mem(args: &[Value]) -> R {
    need("set-mem", args, 4)?;
    Ok(Value::state(state_arg("set-mem", &args[0])?.set_mem(
        args[1].clone(),
        args[2].clone(),
        args[3].clone(),
    )))
}

/// `(store state k1 .. kn v)`: new state with v filed under the key path.
pub fn prim_store(args: &[Value]) -> R {
    if args.len() < 3 {
        runtime_bail!("store: expected a state, at least one key, and a value");
    }
    let state = state_arg("store", &args[0])?;
    let path = args[1..args.len() - 1].to_vec();
    Ok(Value::state(
        state.store_put(path, args[args.len() - 1].clone()),
    ))
}

/// `(retrieve state k1 .. kn)`: stored value or nil.
pub fn prim_retrieve(args: &[Value]) -> R {
    if args.len() < 2 {
        runtime_bail!("retrieve: expected a state and at least one key");
    }
    Ok(state_arg("retrieve", &args[0])?.retrieve(&args[1..]))
}

/// Compiled in as the fall-through of a `case` without a default clause.
pub fn prim_case_fail(args: &[Value]) -> R {
    match args {
        [v] => runtime_bail!("case: no clause matches {v}"),
        _ => runtime_bail!("case: no clause matches"),
    }
}

fn numbers(name: &str, v: &Value) -> Result<Vec<f64>, RuntimeError> {
    seq(name, v)?.iter().map(|x| num(name, x)).collect()
}

fn prim_mean(args: &[Value]) -> R {
    need("mean", args, 1)?;
    Ok(Value::Real(crate::stat::mean(&numbers("mean", &args[0])?)?))
}

fn prim_std(args: &[Value]) -> R {
    need("std", args, 1)?;
    Ok(Value::Real(crate::stat::std(&numbers("std", &args[0])?)?))
}

fn prim_ess(args: &[Value]) -> R {
    need("ess", args, 1)?;
    Ok(Value::Real(crate::stat::ess(&numbers("ess", &args[0])?)?))
}

fn prim_log_sum_exp(args: &[Value]) -> R {
    need("log-sum-exp", args, 1)?;
    Ok(Value::Real(crate::stat::log_sum_exp(&numbers(
        "log-sum-exp",
        &args[0],
    )?)))
}

fn prim_histogram(args: &[Value]) -> R {
    need("histogram", args, 2)?;
    let xs = numbers("histogram", &args[0])?;
    let bins = int("histogram", &args[1])?;
    if bins < 1 {
        runtime_bail!("histogram: bin count must be at least 1, got {bins}");
    }
    let out = crate::stat::histogram(&xs, bins as usize)?;
    Ok(Value::list(
        out.into_iter()
            .map(|(center, count)| {
                Value::vector(vec![Value::Real(center), Value::Int(count as i64)])
            })
            .collect(),
    ))
}

static TABLE: OnceLock<HashMap<&'static str, PrimFn>> = OnceLock::new();

fn table() -> &'static HashMap<&'static str, PrimFn> {
    TABLE.get_or_init(|| {
        let entries: &[(&'static str, PrimFn)] = &[
            ("+", prim_add),
            ("-", prim_sub),
            ("*", prim_mul),
            ("/", prim_div),
            ("inc", prim_inc),
            ("dec", prim_dec),
            ("quot", prim_quot),
            ("rem", prim_rem),
            ("mod", prim_mod),
            ("min", prim_min),
            ("max", prim_max),
            ("abs", prim_abs),
            ("exp", prim_exp),
            ("log", prim_log),
            ("sqrt", prim_sqrt),
            ("pow", prim_pow),
            ("sin", prim_sin),
            ("cos", prim_cos),
            ("tan", prim_tan),
            ("floor", prim_floor),
            ("ceil", prim_ceil),
            ("round", prim_round),
            ("=", prim_eq),
            ("not=", prim_neq),
            ("<", prim_lt),
            (">", prim_gt),
            ("<=", prim_le),
            (">=", prim_ge),
            ("not", prim_not),
            ("zero?", prim_zero_p),
            ("pos?", prim_pos_p),
            ("neg?", prim_neg_p),
            ("even?", prim_even_p),
            ("odd?", prim_odd_p),
            ("nil?", prim_nil_p),
            ("some?", prim_some_p),
            ("true?", prim_true_p),
            ("false?", prim_false_p),
            ("number?", prim_number_p),
            ("integer?", prim_integer_p),
            ("float?", prim_float_p),
            ("string?", prim_string_p),
            ("symbol?", prim_symbol_p),
            ("keyword?", prim_keyword_p),
            ("boolean?", prim_boolean_p),
            ("list?", prim_list_p),
            ("vector?", prim_vector_p),
            ("map?", prim_map_p),
            ("set?", prim_set_p),
            ("fn?", prim_fn_p),
            ("coll?", prim_coll_p),
            ("distribution?", prim_dist_p),
            ("count", prim_count),
            ("empty?", prim_empty_p),
            ("not-empty", prim_not_empty),
            ("first", prim_first),
            ("second", prim_second),
            ("last", prim_last),
            ("rest", prim_rest),
            ("next", prim_next),
            ("butlast", prim_butlast),
            ("nth", prim_nth),
            ("cons", prim_cons),
            ("conj", prim_conj),
            ("concat", prim_concat),
            ("list", prim_list),
            ("vector", prim_vector),
            ("vec", prim_vec),
            ("set", prim_set),
            ("hash-set", prim_hash_set),
            ("hash-map", prim_hash_map),
            ("assoc", prim_assoc),
            ("dissoc", prim_dissoc),
            ("get", prim_get),
            ("contains?", prim_contains_p),
            ("keys", prim_keys),
            ("vals", prim_vals),
            ("reverse", prim_reverse),
            ("distinct", prim_distinct),
            ("sort", prim_sort),
            ("range", prim_range),
            ("take", prim_take),
            ("drop", prim_drop),
            ("str", prim_str),
            ("name", prim_name),
            ("symbol", prim_symbol),
            ("keyword", prim_keyword),
            ("normal", prim_normal),
            ("gamma", prim_gamma),
            ("beta", prim_beta),
            ("flip", prim_flip),
            ("bernoulli", prim_bernoulli),
            ("categorical", prim_categorical),
            ("discrete", prim_discrete),
            ("uniform-discrete", prim_uniform_discrete),
            ("uniform-continuous", prim_uniform_continuous),
            ("beta-bernoulli", prim_beta_bernoulli),
            ("produce", prim_produce),
            ("absorb", prim_absorb),
            ("observe*", prim_observe_star),
            ("in-mem?", prim_in_mem_p),
            ("get-mem", prim_get_mem),
            ("set-mem", prim_set_mem),
            ("mean", prim_mean),
            ("std", prim_std),
            ("ess", prim_ess),
            ("log-sum-exp", prim_log_sum_exp),
            ("histogram", prim_histogram),
        ];
        entries.iter().copied().collect()
    })
}

pub fn lookup(name: &str) -> Option<Primitive> {
    table().get(name).map(|&f| Primitive {
        name: Symbol::new(name),
        f,
    })
}

pub fn names() -> impl Iterator<Item = &'static str> {
    table().keys().copied()
}

/// State mutators used by compiled store/retrieve forms; not in the
/// source-level registry because the compiler supplies the state argument.
pub fn store_primitive() -> Primitive {
    Primitive {
        name: Symbol::new("store"),
        f: prim_store,
    }
}

pub fn retrieve_primitive() -> Primitive {
    Primitive {
        name: Symbol::new("retrieve"),
        f: prim_retrieve,
    }
}

pub fn case_fail_primitive() -> Primitive {
    Primitive {
        name: Symbol::new("case-fail"),
        f: prim_case_fail,
    }
}
