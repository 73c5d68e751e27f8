//! Loading a program: reading its forms, compiling every definition with a
//! single compiler pass, and wiring the results into a shared global scope.
//!
//! Three top-level forms exist. `defquery` compiles a probabilistic program
//! and registers it for inference; `defm` defines a function in query-
//! language source (how the built-in higher-order library is loaded); `def`
//! binds a name to the value of a deterministic expression evaluated at
//! load time. All loaded names share one global scope, and definitions may
//! refer to each other regardless of order.

use std::collections::HashSet;
use std::sync::Arc;

use crate::compiler::ir::{new_globals, Closure, Env, Globals, Ir};
use crate::compiler::prelude::PRELUDE;
use crate::compiler::{CompileError, Compiler};
use crate::inference::machine;
use crate::reader::{read_forms, Form, ReadError};
use crate::runtime::state::State;
use crate::runtime::RuntimeError;
use crate::value::{NativeCont, Symbol, Value};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("read error at {}:{}: {}", .0.line, .0.col, .0.message)]
    Read(#[from] ReadError),
    #[error("compile error: {0}")]
    Compile(#[from] CompileError),
    #[error("load-time evaluation error: {0}")]
    Eval(#[from] RuntimeError),
    #[error("{0}")]
    Malformed(String),
}

macro_rules! load_bail {
    ($($arg:tt)*) => {
        return Err(LoadError::Malformed(format!($($arg)*)))
    };
}

/// A loaded program: every query by name, plus the shared globals all of
/// its definitions close over.
pub struct Program {
    pub queries: Vec<(Symbol, Value)>,
    pub globals: Globals,
}

impl Program {
    pub fn query(&self, name: &str) -> Option<&Value> {
        self.queries
            .iter()
            .find(|(n, _)| n.name() == name)
            .map(|(_, v)| v)
    }

    /// The program's only query, when there is exactly one.
    pub fn single_query(&self) -> Option<&Value> {
        match self.queries.as_slice() {
            [(_, q)] => Some(q),
            _ => None,
        }
    }

    pub fn query_names(&self) -> Vec<&str> {
        self.queries.iter().map(|(n, _)| n.name()).collect()
    }
}

struct Definition {
    name: Symbol,
    kind: Kind,
    doc_stripped: Vec<Form>,
}

enum Kind {
    Query,
    Function,
    Constant,
}

fn parse_definition(form: &Form) -> Result<Definition, LoadError> {
    let Form::List(items) = form else {
        load_bail!("top level: expected a definition list, got {form}");
    };
    let [Form::Sym(head), Form::Sym(name), rest @ ..] = items.as_slice() else {
        load_bail!("top level: expected (defquery name ...), (defm name ...), or (def name expr)");
    };
    let kind = match head.name() {
        "defquery" => Kind::Query,
        "defm" => Kind::Function,
        "def" => Kind::Constant,
        other => load_bail!("top level: unknown form {other}; expected defquery, defm, or def"),
    };
    let doc_stripped = match rest {
        [Form::Str(_), more @ ..] if !more.is_empty() => more.to_vec(),
        _ => rest.to_vec(),
    };
    Ok(Definition {
        name: name.clone(),
        kind,
        doc_stripped,
    })
}

/// Splits a query body into its optional parameter and the remaining forms.
/// The parameter slot is only claimed when a body still follows it, so a
/// lone literal stays a body.
fn query_params(rest: &[Form]) -> (Vec<Form>, &[Form]) {
    match rest {
        [p @ (Form::Sym(_) | Form::Vector(_)), body @ ..] if !body.is_empty() => {
            (vec![p.clone()], body)
        }
        _ => (Vec::new(), rest),
    }
}

fn load_definition(
    compiler: &mut Compiler,
    globals: &Globals,
    def: &Definition,
) -> Result<Option<Value>, LoadError> {
    let env = Env::new(globals.clone());
    match def.kind {
        Kind::Query => {
            let (params, body) = query_params(&def.doc_stripped);
            if body.is_empty() {
                load_bail!("defquery {}: missing a body", def.name);
            }
            let lambda = compiler.compile_function(Some(def.name.clone()), &params, body)?;
            let value = Value::Closure(Arc::new(Closure::new(lambda, env)));
            globals
                .write()
                .expect("globals lock poisoned")
                .insert(def.name.clone(), value.clone());
            Ok(Some(value))
        }
        Kind::Function => {
            let [Form::Vector(params), body @ ..] = def.doc_stripped.as_slice() else {
                load_bail!("defm {}: expected a parameter vector", def.name);
            };
            if body.is_empty() {
                load_bail!("defm {}: missing a body", def.name);
            }
            let lambda = compiler.compile_function(Some(def.name.clone()), params, body)?;
            let value = Value::Closure(Arc::new(Closure::new(lambda, env)));
            globals
                .write()
                .expect("globals lock poisoned")
                .insert(def.name.clone(), value);
            Ok(None)
        }
        Kind::Constant => {
            let [expr] = def.doc_stripped.as_slice() else {
                load_bail!("def {}: expected exactly one expression", def.name);
            };
            let finish = Ir::Const(Value::Cont(NativeCont::new(|v, s| {
                Ok(crate::inference::Step::Checkpoint(
                    crate::inference::Checkpoint::Result {
                        state: s.with_result(v),
                    },
                ))
            })));
            let body = compiler.compile_expression(expr, finish)?;
            let env = env.extend(vec![(
                Symbol::new("$state"),
                Value::state(State::initial()),
            )]);
            let step = machine::exec_tail(&body, &env)?;
            let value = machine::eval_deterministic(step)
                .map_err(|e| RuntimeError::new(format!("def {}: {e}", def.name)))?;
            globals
                .write()
                .expect("globals lock poisoned")
                .insert(def.name.clone(), value);
            Ok(None)
        }
    }
}

/// Reads and loads `src`, with the built-in higher-order library already
/// in scope. Definitions are compiled in one pass sharing a fresh-name
/// counter, so checkpoint identifiers are unique across the whole program.
pub fn load_program(src: &str) -> Result<Program, LoadError> {
    let mut forms = read_forms(PRELUDE).expect("built-in library must parse");
    let user_start = forms.len();
    forms.extend(read_forms(src)?);

    let definitions: Vec<Definition> = forms
        .iter()
        .map(parse_definition)
        .collect::<Result<_, _>>()?;

    let mut names = HashSet::new();
    for def in &definitions {
        names.insert(def.name.clone());
    }
    let mut compiler = Compiler::new(names);
    let globals = new_globals();

    let mut queries = Vec::new();
    for (i, def) in definitions.iter().enumerate() {
        if let Some(query) = load_definition(&mut compiler, &globals, def)? {
            if i >= user_start {
                queries.push((def.name.clone(), query));
            }
        }
    }
    Ok(Program { queries, globals })
}
