//! The executable form produced by the compiler.
//!
//! Nodes split into two kinds. Trivial nodes (constants, variables, native
//! primitive calls, lambda construction) evaluate directly to a value and can
//! never encounter a checkpoint. Tail nodes finish a function body: they
//! either bounce a thunk back to the trampoline, surface a checkpoint, or
//! transfer control through a continuation. The compiler guarantees that
//! every argument position inside a tail node holds a trivial node.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use crate::runtime::{runtime_bail, RuntimeError};
use crate::value::{PrimFn, Symbol, Value};

#[derive(Clone, Debug)]
pub enum Pattern {
    Wild,
    Sym(Symbol),
    Vector {
        elements: Vec<Pattern>,
        rest: Option<Box<Pattern>>,
    },
}

impl Pattern {
    /// Symbols introduced by this pattern, in binding order.
    pub fn bound_names(&self, out: &mut Vec<Symbol>) {
        match self {
            Pattern::Wild => {}
            Pattern::Sym(s) => out.push(s.clone()),
            Pattern::Vector { elements, rest } => {
                for p in elements {
                    p.bound_names(out);
                }
                if let Some(r) = rest {
                    r.bound_names(out);
                }
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Wild => write!(f, "_"),
            Pattern::Sym(s) => write!(f, "{s}"),
            Pattern::Vector { elements, rest } => {
                write!(f, "[")?;
                for (i, p) in elements.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{p}")?;
                }
                if let Some(r) = rest {
                    if elements.is_empty() {
                        write!(f, "& {r}")?;
                    } else {
                        write!(f, " & {r}")?;
                    }
                }
                write!(f, "]")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Params {
    pub required: Vec<Pattern>,
    pub rest: Option<Pattern>,
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.required.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}")?;
        }
        if let Some(r) = &self.rest {
            if self.required.is_empty() {
                write!(f, "& {r}")?;
            } else {
                write!(f, " & {r}")?;
            }
        }
        write!(f, "]")
    }
}

#[derive(Debug)]
pub struct Lambda {
    pub name: Option<Symbol>,
    pub params: Params,
    pub body: Ir,
}

#[derive(Clone)]
pub enum Ir {
    Const(Value),
    Var(Symbol),
    /// Call a native primitive on already-evaluated arguments.
    Prim {
        name: Symbol,
        f: PrimFn,
        args: Vec<Ir>,
    },
    Lambda(Arc<Lambda>),
    /// Fresh symbol minted at evaluation time; keys one memoized function.
    Gensym {
        prefix: &'static str,
    },
    /// Invoke a continuation with a value and the threaded state.
    ContCall {
        cont: Box<Ir>,
        value: Box<Ir>,
        state: Box<Ir>,
    },
    /// Call a function in CPS protocol: continuation and state lead the args.
    CpsCall {
        f: Box<Ir>,
        cont: Box<Ir>,
        state: Box<Ir>,
        args: Vec<Ir>,
    },
    /// Like CpsCall, but the final collection argument is spread.
    CpsApply {
        f: Box<Ir>,
        cont: Box<Ir>,
        state: Box<Ir>,
        args: Vec<Ir>,
        spread: Box<Ir>,
    },
    If {
        cond: Box<Ir>,
        then: Box<Ir>,
        els: Box<Ir>,
    },
    Let {
        bindings: Vec<(Pattern, Ir)>,
        body: Box<Ir>,
    },
    /// Suspend the rest of the computation; the trampoline resumes it.
    /// Shared ownership lets a suspension outlive the frame that built it.
    Thunk(Arc<Ir>),
    Sample {
        id: Box<Ir>,
        dist: Box<Ir>,
        cont: Box<Ir>,
        state: Box<Ir>,
    },
    Observe {
        id: Box<Ir>,
        dist: Box<Ir>,
        value: Box<Ir>,
        cont: Box<Ir>,
        state: Box<Ir>,
    },
}

static GENSYM_COUNTER: AtomicU64 = AtomicU64::new(1);

/// Mints a symbol no evaluation has seen before.
pub fn runtime_gensym(prefix: &str) -> Symbol {
    let n = GENSYM_COUNTER.fetch_add(1, Ordering::Relaxed);
    Symbol::new(format!("{prefix}{n}"))
}

pub type Globals = Arc<RwLock<HashMap<Symbol, Value>>>;

pub fn new_globals() -> Globals {
    Arc::new(RwLock::new(HashMap::new()))
}

#[derive(Debug)]
struct Frame {
    bindings: Vec<(Symbol, Value)>,
    parent: Option<Arc<Frame>>,
}

/// Lexical environment: immutable local frames over shared late-bound
/// globals. Cloning is cheap; extending never disturbs existing captures.
#[derive(Clone)]
pub struct Env {
    frame: Option<Arc<Frame>>,
    globals: Globals,
}

impl Env {
    pub fn new(globals: Globals) -> Self {
        Env {
            frame: None,
            globals,
        }
    }

    pub fn globals(&self) -> &Globals {
        &self.globals
    }

    pub fn extend(&self, bindings: Vec<(Symbol, Value)>) -> Env {
        Env {
            frame: Some(Arc::new(Frame {
                bindings,
                parent: self.frame.clone(),
            })),
            globals: self.globals.clone(),
        }
    }

    pub fn get(&self, name: &Symbol) -> Option<Value> {
        let mut frame = self.frame.as_deref();
        while let Some(fr) = frame {
            for (sym, value) in fr.bindings.iter().rev() {
                if sym == name {
                    return Some(value.clone());
                }
            }
            frame = fr.parent.as_deref();
        }
        self.globals
            .read()
            .expect("globals lock poisoned")
            .get(name)
            .cloned()
    }
}

impl fmt::Debug for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names = Vec::new();
        let mut frame = self.frame.as_deref();
        while let Some(fr) = frame {
            for (sym, _) in &fr.bindings {
                names.push(sym.to_string());
            }
            frame = fr.parent.as_deref();
        }
        write!(f, "#<env {}>", names.join(" "))
    }
}

pub struct Closure {
    pub lambda: Arc<Lambda>,
    pub env: Env,
}

impl Closure {
    pub fn new(lambda: Arc<Lambda>, env: Env) -> Self {
        Closure { lambda, env }
    }
}

impl fmt::Debug for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lambda.name {
            Some(name) => write!(f, "#<fn {name}>"),
            None => write!(f, "#<fn>"),
        }
    }
}

/// Destructures `value` against `pat`, appending bindings in order.
/// Nil destructures like an empty sequence, as in the source language.
pub fn bind_pattern(
    pat: &Pattern,
    value: Value,
    out: &mut Vec<(Symbol, Value)>,
) -> Result<(), RuntimeError> {
    match pat {
        Pattern::Wild => Ok(()),
        Pattern::Sym(s) => {
            out.push((s.clone(), value));
            Ok(())
        }
        Pattern::Vector { elements, rest } => {
            static EMPTY: [Value; 0] = [];
            let items: &[Value] = match &value {
                Value::Nil => &EMPTY,
                other => other.as_seq().ok_or_else(|| {
                    RuntimeError::new(format!(
                        "cannot destructure {} as a sequence",
                        other.type_name()
                    ))
                })?,
            };
            for (i, p) in elements.iter().enumerate() {
                bind_pattern(p, items.get(i).cloned().unwrap_or(Value::Nil), out)?;
            }
            if let Some(r) = rest {
                let tail = items.get(elements.len()..).unwrap_or(&[]).to_vec();
                bind_pattern(r, Value::list(tail), out)?;
            }
            Ok(())
        }
    }
}

/// Binds call arguments to parameters. Extra arguments flow into the rest
/// parameter when there is one and are an arity error otherwise.
pub fn bind_params(
    lambda: &Lambda,
    args: Vec<Value>,
    out: &mut Vec<(Symbol, Value)>,
) -> Result<(), RuntimeError> {
    let required = lambda.params.required.len();
    let arity_name = || match &lambda.name {
        Some(n) => n.to_string(),
        None => "fn".to_string(),
    };
    if args.len() < required {
        runtime_bail!(
            "{}: expected at least {required} arguments, got {}",
            arity_name(),
            args.len()
        );
    }
    if args.len() > required && lambda.params.rest.is_none() {
        runtime_bail!(
            "{}: expected {required} arguments, got {}",
            arity_name(),
            args.len()
        );
    }
    let mut args = args;
    let extra: Vec<Value> = args.split_off(required);
    for (pat, arg) in lambda.params.required.iter().zip(args) {
        bind_pattern(pat, arg, out)?;
    }
    if let Some(rest) = &lambda.params.rest {
        bind_pattern(rest, Value::list(extra), out)?;
    }
    Ok(())
}

fn fmt_const(v: &Value, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        Value::Sym(_) | Value::List(_) => write!(f, "'{v}"),
        Value::Prim(p) => write!(f, "{}", p.name),
        other => write!(f, "{other}"),
    }
}

impl fmt::Display for Ir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ir::Const(v) => fmt_const(v, f),
            Ir::Var(s) => write!(f, "{s}"),
            Ir::Prim { name, args, .. } => {
                write!(f, "({name}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Ir::Lambda(l) => {
                write!(f, "(fn ")?;
                if let Some(name) = &l.name {
                    write!(f, "{name} ")?;
                }
                write!(f, "{} {})", l.params, l.body)
            }
            Ir::Gensym { prefix } => write!(f, "(gensym \"{prefix}\")"),
            Ir::ContCall { cont, value, state } => write!(f, "({cont} {value} {state})"),
            Ir::CpsCall {
                f: func,
                cont,
                state,
                args,
            } => {
                write!(f, "({func} {cont} {state}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Ir::CpsApply {
                f: func,
                cont,
                state,
                args,
                spread,
            } => {
                write!(f, "(apply {func} {cont} {state}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, " {spread})")
            }
            Ir::If { cond, then, els } => write!(f, "(if {cond} {then} {els})"),
            Ir::Let { bindings, body } => {
                write!(f, "(let [")?;
                for (i, (pat, init)) in bindings.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{pat} {init}")?;
                }
                write!(f, "] {body})")
            }
            Ir::Thunk(body) => write!(f, "(fn [] {body})"),
            Ir::Sample {
                id,
                dist,
                cont,
                state,
            } => {
                write!(f, "(->sample {id} {dist} {cont} {state})")
            }
            Ir::Observe {
                id,
                dist,
                value,
                cont,
                state,
            } => {
                write!(f, "(->observe {id} {dist} {value} {cont} {state})")
            }
        }
    }
}

impl fmt::Debug for Ir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Ir {
    /// Renders with line breaks and indentation for human inspection.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(&mut out, 0);
        out
    }

    fn pretty_into(&self, out: &mut String, indent: usize) {
        let flat = self.to_string();
        if indent * 2 + flat.len() <= 90 {
            out.push_str(&flat);
            return;
        }
        let pad = |out: &mut String, n: usize| {
            out.push('\n');
            for _ in 0..n {
                out.push_str("  ");
            }
        };
        match self {
            Ir::Lambda(l) => {
                out.push_str("(fn ");
                if let Some(name) = &l.name {
                    out.push_str(&name.to_string());
                    out.push(' ');
                }
                out.push_str(&l.params.to_string());
                pad(out, indent + 1);
                l.body.pretty_into(out, indent + 1);
                out.push(')');
            }
            Ir::Thunk(body) => {
                out.push_str("(fn []");
                pad(out, indent + 1);
                body.pretty_into(out, indent + 1);
                out.push(')');
            }
            Ir::If { cond, then, els } => {
                out.push_str(&format!("(if {cond}"));
                pad(out, indent + 1);
                then.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                els.pretty_into(out, indent + 1);
                out.push(')');
            }
            Ir::Let { bindings, body } => {
                out.push_str("(let [");
                for (i, (pat, init)) in bindings.iter().enumerate() {
                    if i > 0 {
                        pad(out, indent + 3);
                    }
                    out.push_str(&format!("{pat} "));
                    init.pretty_into(out, indent + 3);
                }
                out.push(']');
                pad(out, indent + 1);
                body.pretty_into(out, indent + 1);
                out.push(')');
            }
            Ir::ContCall { cont, value, state } => {
                out.push('(');
                cont.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                value.pretty_into(out, indent + 1);
                out.push(' ');
                out.push_str(&state.to_string());
                out.push(')');
            }
            Ir::CpsCall {
                f,
                cont,
                state,
                args,
            } => {
                out.push('(');
                f.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                cont.pretty_into(out, indent + 1);
                out.push(' ');
                out.push_str(&state.to_string());
                for a in args {
                    pad(out, indent + 1);
                    a.pretty_into(out, indent + 1);
                }
                out.push(')');
            }
            Ir::CpsApply {
                f,
                cont,
                state,
                args,
                spread,
            } => {
                out.push_str("(apply ");
                f.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                cont.pretty_into(out, indent + 1);
                out.push(' ');
                out.push_str(&state.to_string());
                for a in args {
                    pad(out, indent + 1);
                    a.pretty_into(out, indent + 1);
                }
                pad(out, indent + 1);
                spread.pretty_into(out, indent + 1);
                out.push(')');
            }
            Ir::Sample {
                id,
                dist,
                cont,
                state,
            } => {
                out.push_str(&format!("(->sample {id}"));
                pad(out, indent + 1);
                dist.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                cont.pretty_into(out, indent + 1);
                out.push(' ');
                out.push_str(&state.to_string());
                out.push(')');
            }
            Ir::Observe {
                id,
                dist,
                value,
                cont,
                state,
            } => {
                out.push_str(&format!("(->observe {id}"));
                pad(out, indent + 1);
                dist.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                value.pretty_into(out, indent + 1);
                pad(out, indent + 1);
                cont.pretty_into(out, indent + 1);
                out.push(' ');
                out.push_str(&state.to_string());
                out.push(')');
            }
            Ir::Prim { name, args, .. } => {
                out.push_str(&format!("({name}"));
                for a in args {
                    pad(out, indent + 1);
                    a.pretty_into(out, indent + 1);
                }
                out.push(')');
            }
            other => out.push_str(&other.to_string()),
        }
    }
}
