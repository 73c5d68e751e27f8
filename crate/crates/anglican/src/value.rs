//! Runtime values shared by the reader, compiler, and interpreter.

use std::fmt;
use std::sync::Arc;

use crate::compiler::ir::Closure;
use crate::inference::Step;
use crate::runtime::dist::Distribution;
use crate::runtime::process::RandomProcess;
use crate::runtime::state::State;
use crate::runtime::RuntimeError;

/// Interned-ish symbol name. Cloning is a pointer copy.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: impl AsRef<str>) -> Self {
        Symbol(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Namespace part of a `ns/name` symbol, if any.
    pub fn namespace(&self) -> Option<&str> {
        let s = &*self.0;
        // a lone "/" is the division symbol, not a namespaced name
        match s.find('/') {
            Some(i) if i > 0 && i + 1 < s.len() => Some(&s[..i]),
            _ => None,
        }
    }

    /// Name with any namespace prefix stripped.
    pub fn base_name(&self) -> &str {
        match self.namespace() {
            Some(ns) => &self.0[ns.len() + 1..],
            None => &self.0,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Keyword(Arc<str>);

impl Keyword {
    pub fn new(name: impl AsRef<str>) -> Self {
        Keyword(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":{}", self.0)
    }
}

impl fmt::Debug for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":{}", self.0)
    }
}

/// Signature of a native primitive function.
pub type PrimFn = fn(&[Value]) -> Result<Value, RuntimeError>;

/// Named native function; first-class so it can be passed to higher-order code.
#[derive(Clone)]
pub struct Primitive {
    pub name: Symbol,
    pub f: PrimFn,
}

impl fmt::Debug for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#<prim {}>", self.name)
    }
}

/// Native continuation: takes a value and the threaded state, yields the next step.
pub type ContFn = Arc<dyn Fn(Value, State) -> Result<Step, RuntimeError> + Send + Sync>;

#[derive(Clone)]
pub struct NativeCont(pub ContFn);

impl NativeCont {
    pub fn new(
        f: impl Fn(Value, State) -> Result<Step, RuntimeError> + Send + Sync + 'static,
    ) -> Self {
        NativeCont(Arc::new(f))
    }
}

impl fmt::Debug for NativeCont {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#<cont>")
    }
}

#[derive(Clone, Debug)]
pub enum Value {
    Nil,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(Arc<str>),
    Sym(Symbol),
    Key(Keyword),
    List(Arc<Vec<Value>>),
    Vector(Arc<Vec<Value>>),
    /// Ordered key/value pairs; keys distinct under structural equality.
    Map(Arc<Vec<(Value, Value)>>),
    Set(Arc<Vec<Value>>),
    Dist(Arc<Distribution>),
    Proc(Arc<RandomProcess>),
    Closure(Arc<Closure>),
    Prim(Primitive),
    Cont(NativeCont),
    State(Box<State>),
}

impl Value {
    pub fn string(s: impl AsRef<str>) -> Self {
        Value::Str(Arc::from(s.as_ref()))
    }

    pub fn sym(name: impl AsRef<str>) -> Self {
        Value::Sym(Symbol::new(name))
    }

    pub fn key(name: impl AsRef<str>) -> Self {
        Value::Key(Keyword::new(name))
    }

    pub fn state(s: State) -> Self {
        Value::State(Box::new(s))
    }

    pub fn list(items: Vec<Value>) -> Self {
        Value::List(Arc::new(items))
    }

    pub fn vector(items: Vec<Value>) -> Self {
        Value::Vector(Arc::new(items))
    }

    pub fn is_truthy(&self) -> bool {
        !matches!(self, Value::Nil | Value::Bool(false))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Str(_) => "string",
            Value::Sym(_) => "symbol",
            Value::Key(_) => "keyword",
            Value::List(_) => "list",
            Value::Vector(_) => "vector",
            Value::Map(_) => "map",
            Value::Set(_) => "set",
            Value::Dist(_) => "distribution",
            Value::Proc(_) => "random-process",
            Value::Closure(_) => "fn",
            Value::Prim(_) => "fn",
            Value::Cont(_) => "continuation",
            Value::State(_) => "state",
        }
    }

    /// Numeric view: ints widen to reals.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Sequential view shared by list/vector/nil (nil reads as empty).
    pub fn as_seq(&self) -> Option<&[Value]> {
        match self {
            Value::List(xs) | Value::Vector(xs) => Some(xs),
            Value::Nil => Some(&[]),
            _ => None,
        }
    }

    /// Looks a key up in a map value; `None` for absent keys and non-maps.
    pub fn get(&self, key: &Value) -> Option<&Value> {
        match self {
            Value::Map(pairs) => pairs.iter().find(|(k, _)| value_eq(k, key)).map(|(_, v)| v),
            _ => None,
        }
    }
}

/// Structural equality; sequences compare across list/vector, maps and sets
/// compare unordered, functions compare by identity.
pub fn value_eq(a: &Value, b: &Value) -> bool {
    use Value::*;
    match (a, b) {
        (Nil, Nil) => true,
        (Bool(x), Bool(y)) => x == y,
        (Int(x), Int(y)) => x == y,
        (Real(x), Real(y)) => x == y,
        (Str(x), Str(y)) => x == y,
        (Sym(x), Sym(y)) => x == y,
        (Key(x), Key(y)) => x == y,
        (List(x) | Vector(x), List(y) | Vector(y)) => {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| value_eq(p, q))
        }
        (Map(x), Map(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, v)| y.iter().any(|(k2, v2)| value_eq(k, k2) && value_eq(v, v2)))
        }
        (Set(x), Set(y)) => {
            x.len() == y.len() && x.iter().all(|e| y.iter().any(|e2| value_eq(e, e2)))
        }
        (Dist(x), Dist(y)) => x.structural_eq(y),
        (Proc(x), Proc(y)) => x == y,
        (Closure(x), Closure(y)) => Arc::ptr_eq(x, y),
        (Prim(x), Prim(y)) => x.name == y.name,
        (Cont(x), Cont(y)) => Arc::ptr_eq(&x.0, &y.0),
        (State(x), State(y)) => x.structural_eq(y),
        _ => false,
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        value_eq(self, other)
    }
}

/// Prints a real so it reads back as a real (always keeps a decimal point or exponent).
pub fn format_real(r: f64) -> String {
    if r.is_nan() {
        return "##NaN".into();
    }
    if r.is_infinite() {
        return if r > 0.0 {
            "##Inf".into()
        } else {
            "##-Inf".into()
        };
    }
    let magnitude = r.abs();
    if magnitude != 0.0 && !(1e-5..1e17).contains(&magnitude) {
        return format!("{r:e}");
    }
    let s = format!("{r}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => write!(f, "nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{}", format_real(*r)),
            Value::Str(s) => write!(f, "{:?}", &**s),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Key(k) => write!(f, "{k}"),
            Value::List(xs) => write_seq(f, "(", xs, ")"),
            Value::Vector(xs) => write_seq(f, "[", xs, "]"),
            Value::Map(pairs) => {
                write!(f, "{{")?;
                for (i, (k, v)) in pairs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{k} {v}")?;
                }
                write!(f, "}}")
            }
            Value::Set(xs) => write_seq(f, "#{", xs, "}"),
            Value::Dist(d) => write!(f, "{d}"),
            Value::Proc(p) => write!(f, "{p}"),
            Value::Closure(c) => match &c.lambda.name {
                Some(n) => write!(f, "#<fn {n}>"),
                None => write!(f, "#<fn>"),
            },
            Value::Prim(p) => write!(f, "#<prim {}>", p.name),
            Value::Cont(_) => write!(f, "#<cont>"),
            Value::State(_) => write!(f, "#<state>"),
        }
    }
}

fn write_seq(f: &mut fmt::Formatter<'_>, open: &str, xs: &[Value], close: &str) -> fmt::Result {
    write!(f, "{open}")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, "{close}")
}
