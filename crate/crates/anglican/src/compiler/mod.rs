//! Source-to-IR transformation in continuation passing style.
//!
//! Compiled functions receive their continuation and the threaded state as
//! leading parameters named `cont` and `$state`. Function bodies and branch
//! arms are wrapped in zero-argument thunks, so every call site returns to
//! the trampoline after a bounded amount of work regardless of how deep the
//! source recursion runs. Expressions that cannot reach a checkpoint
//! (constants, variables, native primitive calls, closure construction)
//! evaluate inline; everything else threads through continuations.

pub mod ir;
pub mod prelude;

use std::collections::HashSet;
use std::sync::Arc;

use crate::reader::Form;
use crate::runtime::primitives;
use crate::value::{Primitive, Symbol, Value};

use ir::{Ir, Lambda, Params, Pattern};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CompileError(pub String);

macro_rules! compile_bail {
    ($($arg:tt)*) => {
        return Err(CompileError(format!($($arg)*)))
    };
}

type CResult = Result<Ir, CompileError>;
type ChainK = Box<dyn FnOnce(&mut Compiler, Vec<Ir>) -> CResult>;

const SPECIAL_FORMS: &[&str] = &[
    "if", "do", "let", "fn", "loop", "recur", "and", "or", "when", "cond", "case", "quote",
    "apply", "sample", "observe", "mem", "store", "retrieve",
];

const TOP_LEVEL_FORMS: &[&str] = &["def", "defm", "defquery"];

fn is_special(name: &str) -> bool {
    SPECIAL_FORMS.contains(&name)
}

fn is_top_level_form(name: &str) -> bool {
    TOP_LEVEL_FORMS.contains(&name)
}

/// Names that user code may not bind: the special forms plus the two symbols
/// the transform itself threads through every function.
fn is_reserved_binding(name: &str) -> bool {
    is_special(name) || is_top_level_form(name) || name == "cont" || name == "$state"
}

fn cont_sym() -> Symbol {
    Symbol::new("cont")
}

fn state_sym() -> Symbol {
    Symbol::new("$state")
}

fn state_var() -> Ir {
    Ir::Var(state_sym())
}

fn bx(ir: Ir) -> Box<Ir> {
    Box::new(ir)
}

fn arc(ir: Ir) -> Arc<Ir> {
    Arc::new(ir)
}

/// `(cont value $state)`: hand the value to the continuation unchanged.
fn ret(cont: Ir, value: Ir) -> Ir {
    Ir::ContCall {
        cont: bx(cont),
        value: bx(value),
        state: bx(state_var()),
    }
}

fn registry_prim(name: &str) -> Primitive {
    primitives::lookup(name).unwrap_or_else(|| panic!("primitive {name} missing from registry"))
}

fn prim_node(prim: Primitive, args: Vec<Ir>) -> Ir {
    Ir::Prim {
        name: prim.name,
        f: prim.f,
        args,
    }
}

/// Quoted data becomes the value it spells.
pub fn form_to_value(form: &Form) -> Result<Value, CompileError> {
    Ok(match form {
        Form::Nil => Value::Nil,
        Form::Bool(b) => Value::Bool(*b),
        Form::Int(i) => Value::Int(*i),
        Form::Real(r) => Value::Real(*r),
        Form::Str(s) => Value::string(s),
        Form::Sym(s) => Value::Sym(s.clone()),
        Form::Key(k) => Value::Key(k.clone()),
        Form::List(items) => {
            Value::list(items.iter().map(form_to_value).collect::<Result<_, _>>()?)
        }
        Form::Vector(items) => {
            Value::vector(items.iter().map(form_to_value).collect::<Result<_, _>>()?)
        }
        Form::Map(pairs) => Value::Map(Arc::new(
            pairs
                .iter()
                .map(|(k, v)| Ok((form_to_value(k)?, form_to_value(v)?)))
                .collect::<Result<_, CompileError>>()?,
        )),
        Form::Set(items) => Value::Set(Arc::new(
            items.iter().map(form_to_value).collect::<Result<_, _>>()?,
        )),
        Form::Quoted(inner) => Value::list(vec![Value::sym("quote"), form_to_value(inner)?]),
    })
}

fn parse_binding_symbol(s: &Symbol) -> Result<Symbol, CompileError> {
    if is_reserved_binding(s.name()) {
        compile_bail!("{s} is reserved and cannot be bound");
    }
    Ok(s.clone())
}

fn parse_pattern(form: &Form) -> Result<Pattern, CompileError> {
    match form {
        Form::Sym(s) if s.name() == "_" => Ok(Pattern::Wild),
        Form::Sym(s) => Ok(Pattern::Sym(parse_binding_symbol(s)?)),
        Form::Vector(items) => {
            let mut elements = Vec::new();
            let mut rest = None;
            let mut i = 0;
            while i < items.len() {
                if matches!(&items[i], Form::Sym(s) if s.name() == "&") {
                    if i + 2 != items.len() {
                        compile_bail!("destructuring: & must be followed by exactly one pattern");
                    }
                    rest = Some(Box::new(parse_pattern(&items[i + 1])?));
                    i += 2;
                } else {
                    elements.push(parse_pattern(&items[i])?);
                    i += 1;
                }
            }
            Ok(Pattern::Vector { elements, rest })
        }
        other => compile_bail!("unsupported binding form: {other}"),
    }
}

fn parse_params(forms: &[Form]) -> Result<Params, CompileError> {
    let mut required = Vec::new();
    let mut rest = None;
    let mut i = 0;
    while i < forms.len() {
        if matches!(&forms[i], Form::Sym(s) if s.name() == "&") {
            if i + 2 != forms.len() {
                compile_bail!("parameters: & must be followed by exactly one pattern");
            }
            rest = Some(parse_pattern(&forms[i + 1])?);
            i += 2;
        } else {
            required.push(parse_pattern(&forms[i])?);
            i += 1;
        }
    }
    Ok(Params { required, rest })
}

enum Resolution {
    Bound,
    Prim(Primitive),
    Special,
    TopForm,
    Unknown,
}

pub struct Compiler {
    toplevel: HashSet<Symbol>,
    scope: Vec<Symbol>,
    fresh: u64,
    loop_target: Option<(Symbol, usize)>,
}

impl Compiler {
    pub fn new(toplevel: HashSet<Symbol>) -> Self {
        Compiler {
            toplevel,
            scope: Vec::new(),
            fresh: 0,
            loop_target: None,
        }
    }

    /// Registers another top-level name after construction.
    pub fn add_toplevel(&mut self, name: Symbol) {
        self.toplevel.insert(name);
    }

    fn fresh_sym(&mut self, prefix: &str) -> Symbol {
        self.fresh += 1;
        Symbol::new(format!("{prefix}{}", self.fresh))
    }

    fn resolve(&self, s: &Symbol) -> Resolution {
        if self.scope.iter().rev().any(|b| b == s) || self.toplevel.contains(s) {
            return Resolution::Bound;
        }
        if is_special(s.name()) {
            return Resolution::Special;
        }
        if is_top_level_form(s.name()) {
            return Resolution::TopForm;
        }
        match primitives::lookup(s.name()) {
            Some(p) => Resolution::Prim(p),
            None => Resolution::Unknown,
        }
    }

    /// Compiles `form` so that its value flows into the continuation
    /// denoted by the IR expression `cont`.
    pub fn compile_expression(&mut self, form: &Form, cont: Ir) -> CResult {
        self.compile(form, cont)
    }

    /// Compiles a function definition into a CPS lambda whose parameter list
    /// starts with the continuation and the threaded state.
    pub fn compile_function(
        &mut self,
        name: Option<Symbol>,
        param_forms: &[Form],
        body: &[Form],
    ) -> Result<Arc<Lambda>, CompileError> {
        let params = parse_params(param_forms)?;
        let mark = self.scope.len();
        let saved_target = self.loop_target.take();
        for p in params.required.iter().chain(params.rest.iter()) {
            p.bound_names(&mut self.scope);
        }
        if let Some(n) = &name {
            self.scope.push(n.clone());
        }
        let body_ir = self.compile_body(body, Ir::Var(cont_sym()));
        self.scope.truncate(mark);
        self.loop_target = saved_target;
        let body_ir = body_ir?;
        let mut required = vec![Pattern::Sym(cont_sym()), Pattern::Sym(state_sym())];
        required.extend(params.required);
        Ok(Arc::new(Lambda {
            name,
            params: Params {
                required,
                rest: params.rest,
            },
            body: Ir::Thunk(arc(body_ir)),
        }))
    }

    fn compile(&mut self, form: &Form, cont: Ir) -> CResult {
        if let Some(triv) = self.try_trivial(form)? {
            return Ok(ret(cont, triv));
        }
        match form {
            Form::Vector(items) => {
                let items = items.clone();
                self.chain(
                    &items,
                    Box::new(move |_, trivs| {
                        Ok(ret(cont, prim_node(registry_prim("vector"), trivs)))
                    }),
                )
            }
            Form::Map(pairs) => {
                let flat: Vec<Form> = pairs
                    .iter()
                    .flat_map(|(k, v)| [k.clone(), v.clone()])
                    .collect();
                self.chain(
                    &flat,
                    Box::new(move |_, trivs| {
                        Ok(ret(cont, prim_node(registry_prim("hash-map"), trivs)))
                    }),
                )
            }
            Form::Set(items) => {
                let items = items.clone();
                self.chain(
                    &items,
                    Box::new(move |_, trivs| {
                        let listed = prim_node(registry_prim("list"), trivs);
                        Ok(ret(cont, prim_node(registry_prim("set"), vec![listed])))
                    }),
                )
            }
            Form::List(items) => self.compile_list(items, cont),
            _ => unreachable!("atoms always compile as trivial expressions"),
        }
    }

    /// Returns IR for expressions that evaluate without touching a
    /// checkpoint, or None when the expression needs the full transform.
    fn try_trivial(&mut self, form: &Form) -> Result<Option<Ir>, CompileError> {
        match form {
            Form::Nil => Ok(Some(Ir::Const(Value::Nil))),
            Form::Bool(b) => Ok(Some(Ir::Const(Value::Bool(*b)))),
            Form::Int(i) => Ok(Some(Ir::Const(Value::Int(*i)))),
            Form::Real(r) => Ok(Some(Ir::Const(Value::Real(*r)))),
            Form::Str(s) => Ok(Some(Ir::Const(Value::string(s)))),
            Form::Key(k) => Ok(Some(Ir::Const(Value::Key(k.clone())))),
            Form::Quoted(inner) => Ok(Some(Ir::Const(form_to_value(inner)?))),
            Form::Sym(s) => match self.resolve(s) {
                Resolution::Bound | Resolution::Unknown => Ok(Some(Ir::Var(s.clone()))),
                Resolution::Prim(p) => Ok(Some(Ir::Const(Value::Prim(p)))),
                Resolution::Special => {
                    compile_bail!("{s} is a special form and cannot be used as a value")
                }
                Resolution::TopForm => compile_bail!("{s} is only allowed at the top level"),
            },
            Form::Vector(items) => {
                let Some(trivs) = self.try_trivial_all(items)? else {
                    return Ok(None);
                };
                Ok(Some(prim_node(registry_prim("vector"), trivs)))
            }
            Form::Map(pairs) => {
                let flat: Vec<Form> = pairs
                    .iter()
                    .flat_map(|(k, v)| [k.clone(), v.clone()])
                    .collect();
                let Some(trivs) = self.try_trivial_all(&flat)? else {
                    return Ok(None);
                };
                Ok(Some(prim_node(registry_prim("hash-map"), trivs)))
            }
            Form::Set(items) => {
                let Some(trivs) = self.try_trivial_all(items)? else {
                    return Ok(None);
                };
                let listed = prim_node(registry_prim("list"), trivs);
                Ok(Some(prim_node(registry_prim("set"), vec![listed])))
            }
            Form::List(items) => {
                let Some(head) = items.first() else {
                    return Ok(Some(Ir::Const(Value::list(Vec::new()))));
                };
                let Form::Sym(s) = head else { return Ok(None) };
                match s.name() {
                    "quote" => {
                        if items.len() != 2 {
                            compile_bail!("quote: expected exactly one form");
                        }
                        Ok(Some(Ir::Const(form_to_value(&items[1])?)))
                    }
                    "fn" => Ok(Some(Ir::Lambda(self.compile_fn_form(&items[1..])?))),
                    "retrieve" => {
                        if items.len() < 2 {
                            compile_bail!("retrieve: expected at least one key");
                        }
                        let Some(keys) = self.try_trivial_all(&items[1..])? else {
                            return Ok(None);
                        };
                        let mut args = vec![state_var()];
                        args.extend(keys);
                        Ok(Some(prim_node(primitives::retrieve_primitive(), args)))
                    }
                    name if is_special(name) || is_top_level_form(name) => Ok(None),
                    _ => match self.resolve(s) {
                        Resolution::Prim(p) => {
                            let Some(trivs) = self.try_trivial_all(&items[1..])? else {
                                return Ok(None);
                            };
                            Ok(Some(prim_node(p, trivs)))
                        }
                        _ => Ok(None),
                    },
                }
            }
        }
    }

    fn try_trivial_all(&mut self, forms: &[Form]) -> Result<Option<Vec<Ir>>, CompileError> {
        let mut out = Vec::with_capacity(forms.len());
        for f in forms {
            match self.try_trivial(f)? {
                Some(ir) => out.push(ir),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    /// Evaluates `forms` left to right, threading checkpoints through fresh
    /// continuations, then hands the trivial results to `k`.
    fn chain(&mut self, forms: &[Form], k: ChainK) -> CResult {
        self.chain_acc(forms, Vec::new(), k)
    }

    fn chain_acc(&mut self, forms: &[Form], mut acc: Vec<Ir>, k: ChainK) -> CResult {
        let Some((first, rest)) = forms.split_first() else {
            return k(self, acc);
        };
        if let Some(triv) = self.try_trivial(first)? {
            acc.push(triv);
            return self.chain_acc(rest, acc, k);
        }
        let v = self.fresh_sym("V");
        acc.push(Ir::Var(v.clone()));
        let rest: Vec<Form> = rest.to_vec();
        let body = self.chain_acc(&rest, acc, k)?;
        let lambda = Arc::new(Lambda {
            name: None,
            params: Params {
                required: vec![Pattern::Sym(v), Pattern::Sym(state_sym())],
                rest: None,
            },
            body,
        });
        self.compile(first, Ir::Lambda(lambda))
    }

    /// Binds the continuation to a name when it is not already cheap to
    /// duplicate across several use sites.
    fn with_bound_cont(&mut self, cont: Ir, f: impl FnOnce(&mut Self, Ir) -> CResult) -> CResult {
        match cont {
            Ir::Var(_) | Ir::Const(_) => f(self, cont),
            other => {
                let c = self.fresh_sym("C");
                let body = f(self, Ir::Var(c.clone()))?;
                Ok(Ir::Let {
                    bindings: vec![(Pattern::Sym(c), other)],
                    body: bx(body),
                })
            }
        }
    }

    /// Ensures a trivial expression is cheap before it gets duplicated.
    fn with_simple(&mut self, triv: Ir, f: impl FnOnce(&mut Self, Ir) -> CResult) -> CResult {
        match triv {
            Ir::Var(_) | Ir::Const(_) => f(self, triv),
            other => {
                let v = self.fresh_sym("V");
                let body = f(self, Ir::Var(v.clone()))?;
                Ok(Ir::Let {
                    bindings: vec![(Pattern::Sym(v), other)],
                    body: bx(body),
                })
            }
        }
    }

    fn compile_body(&mut self, forms: &[Form], cont: Ir) -> CResult {
        match forms {
            [] => Ok(ret(cont, Ir::Const(Value::Nil))),
            [only] => self.compile(only, cont),
            [first, rest @ ..] => {
                let rest: Vec<Form> = rest.to_vec();
                let body = self.compile_body(&rest, cont)?;
                let lambda = Arc::new(Lambda {
                    name: None,
                    params: Params {
                        required: vec![Pattern::Wild, Pattern::Sym(state_sym())],
                        rest: None,
                    },
                    body,
                });
                self.compile(first, Ir::Lambda(lambda))
            }
        }
    }

    fn compile_list(&mut self, items: &[Form], cont: Ir) -> CResult {
        let head = &items[0];
        let args = &items[1..];
        if let Form::Sym(s) = head {
            match s.name() {
                "if" => return self.compile_if(args, cont),
                "do" => return self.compile_body(args, cont),
                "let" => return self.compile_let(args, cont),
                "loop" => return self.compile_loop(args, cont),
                "recur" => return self.compile_recur(args, cont),
                "and" => return self.compile_and(args, cont),
                "or" => return self.compile_or(args, cont),
                "when" => return self.compile_when(args, cont),
                "cond" => return self.compile_cond(args, cont),
                "case" => return self.compile_case(args, cont),
                "sample" => return self.compile_sample(args, cont),
                "observe" => return self.compile_observe(args, cont),
                "mem" => return self.compile_mem(args, cont),
                "store" => return self.compile_store(args, cont),
                "retrieve" => return self.compile_retrieve(args, cont),
                "apply" => return self.compile_apply(args, cont),
                name if is_top_level_form(name) => {
                    compile_bail!("{name} is only allowed at the top level")
                }
                _ => {}
            }
            if let Resolution::Prim(p) = self.resolve(s) {
                let args = args.to_vec();
                return self.chain(
                    &args,
                    Box::new(move |_, trivs| Ok(ret(cont, prim_node(p, trivs)))),
                );
            }
        }
        let all: Vec<Form> = items.to_vec();
        self.chain(
            &all,
            Box::new(move |_, mut trivs| {
                let f = trivs.remove(0);
                Ok(Ir::CpsCall {
                    f: bx(f),
                    cont: bx(cont),
                    state: bx(state_var()),
                    args: trivs,
                })
            }),
        )
    }

    fn compile_if(&mut self, args: &[Form], cont: Ir) -> CResult {
        if args.len() != 2 && args.len() != 3 {
            compile_bail!("if: expected a condition and one or two branches");
        }
        let cond = args[0].clone();
        let then = args[1].clone();
        let els = args.get(2).cloned().unwrap_or(Form::Nil);
        self.with_bound_cont(cont, move |c, k| {
            c.chain(
                &[cond],
                Box::new(move |c, mut trivs| {
                    let then_ir = c.compile(&then, k.clone())?;
                    let else_ir = c.compile(&els, k)?;
                    Ok(Ir::If {
                        cond: bx(trivs.pop().unwrap()),
                        then: bx(Ir::Thunk(arc(then_ir))),
                        els: bx(Ir::Thunk(arc(else_ir))),
                    })
                }),
            )
        })
    }

    fn compile_let(&mut self, args: &[Form], cont: Ir) -> CResult {
        let Some(Form::Vector(binds)) = args.first() else {
            compile_bail!("let: expected a binding vector");
        };
        if binds.len() % 2 != 0 {
            compile_bail!("let: binding vector needs an even number of forms");
        }
        let mark = self.scope.len();
        let result = self.compile_bindings(binds, &args[1..], cont);
        self.scope.truncate(mark);
        result
    }

    fn compile_bindings(&mut self, binds: &[Form], body: &[Form], cont: Ir) -> CResult {
        let Some((pat_form, rest)) = binds.split_first() else {
            return self.compile_body(body, cont);
        };
        let (init_form, rest) = rest.split_first().expect("even binding count checked");
        let pat = parse_pattern(pat_form)?;
        if let Some(triv) = self.try_trivial(init_form)? {
            pat.bound_names(&mut self.scope);
            let inner = self.compile_bindings(rest, body, cont)?;
            // Collapse consecutive trivial bindings into one let form.
            return Ok(match inner {
                Ir::Let { mut bindings, body } => {
                    bindings.insert(0, (pat, triv));
                    Ir::Let { bindings, body }
                }
                other => Ir::Let {
                    bindings: vec![(pat, triv)],
                    body: bx(other),
                },
            });
        }
        let mark = self.scope.len();
        pat.bound_names(&mut self.scope);
        let inner = self.compile_bindings(rest, body, cont);
        self.scope.truncate(mark);
        let inner = inner?;
        let lambda = Arc::new(Lambda {
            name: None,
            params: Params {
                required: vec![pat, Pattern::Sym(state_sym())],
                rest: None,
            },
            body: inner,
        });
        self.compile(init_form, Ir::Lambda(lambda))
    }

    fn compile_fn_form(&mut self, forms: &[Form]) -> Result<Arc<Lambda>, CompileError> {
        let (name, rest) = match forms.first() {
            Some(Form::Sym(s)) => (Some(parse_binding_symbol(s)?), &forms[1..]),
            _ => (None, forms),
        };
        let Some(Form::Vector(param_forms)) = rest.first() else {
            compile_bail!("fn: expected a parameter vector");
        };
        self.compile_function(name, param_forms, &rest[1..])
    }

    fn compile_loop(&mut self, args: &[Form], cont: Ir) -> CResult {
        let Some(Form::Vector(binds)) = args.first() else {
            compile_bail!("loop: expected a binding vector");
        };
        if binds.len() % 2 != 0 {
            compile_bail!("loop: binding vector needs an even number of forms");
        }
        let patterns: Vec<Pattern> = binds
            .iter()
            .step_by(2)
            .map(parse_pattern)
            .collect::<Result<_, _>>()?;
        let inits: Vec<Form> = binds.iter().skip(1).step_by(2).cloned().collect();
        let loop_name = self.fresh_sym("loop");

        let mark = self.scope.len();
        let saved_target = self.loop_target.take();
        for p in &patterns {
            p.bound_names(&mut self.scope);
        }
        self.scope.push(loop_name.clone());
        self.loop_target = Some((loop_name.clone(), patterns.len()));
        let body_ir = self.compile_body(&args[1..], Ir::Var(cont_sym()));
        self.scope.truncate(mark);
        self.loop_target = saved_target;
        let body_ir = body_ir?;

        let mut required = vec![Pattern::Sym(cont_sym()), Pattern::Sym(state_sym())];
        required.extend(patterns);
        let lambda = Arc::new(Lambda {
            name: Some(loop_name),
            params: Params {
                required,
                rest: None,
            },
            body: Ir::Thunk(arc(body_ir)),
        });
        self.chain(
            &inits,
            Box::new(move |_, trivs| {
                Ok(Ir::CpsCall {
                    f: bx(Ir::Lambda(lambda)),
                    cont: bx(cont),
                    state: bx(state_var()),
                    args: trivs,
                })
            }),
        )
    }

    /// Recur re-enters the loop function as an ordinary recursive call, so
    /// its value flows to whatever surrounds the recur expression.
    fn compile_recur(&mut self, args: &[Form], cont: Ir) -> CResult {
        let Some((target, arity)) = self.loop_target.clone() else {
            compile_bail!("recur: no enclosing loop");
        };
        if args.len() != arity {
            compile_bail!("recur: expected {arity} arguments, got {}", args.len());
        }
        let args = args.to_vec();
        self.chain(
            &args,
            Box::new(move |_, trivs| {
                Ok(Ir::CpsCall {
                    f: bx(Ir::Var(target)),
                    cont: bx(cont),
                    state: bx(state_var()),
                    args: trivs,
                })
            }),
        )
    }

    fn compile_and(&mut self, args: &[Form], cont: Ir) -> CResult {
        match args {
            [] => Ok(ret(cont, Ir::Const(Value::Bool(true)))),
            [only] => self.compile(only, cont),
            [first, rest @ ..] => {
                let first = first.clone();
                let rest: Vec<Form> = rest.to_vec();
                self.with_bound_cont(cont, move |c, k| {
                    c.chain(
                        &[first],
                        Box::new(move |c, mut trivs| {
                            let head = trivs.pop().unwrap();
                            c.with_simple(head, move |c, head| {
                                let more = c.compile_and(&rest, k.clone())?;
                                Ok(Ir::If {
                                    cond: bx(head.clone()),
                                    then: bx(Ir::Thunk(arc(more))),
                                    els: bx(Ir::Thunk(arc(ret(k, head)))),
                                })
                            })
                        }),
                    )
                })
            }
        }
    }

    fn compile_or(&mut self, args: &[Form], cont: Ir) -> CResult {
        match args {
            [] => Ok(ret(cont, Ir::Const(Value::Nil))),
            [only] => self.compile(only, cont),
            [first, rest @ ..] => {
                let first = first.clone();
                let rest: Vec<Form> = rest.to_vec();
                self.with_bound_cont(cont, move |c, k| {
                    c.chain(
                        &[first],
                        Box::new(move |c, mut trivs| {
                            let head = trivs.pop().unwrap();
                            c.with_simple(head, move |c, head| {
                                let more = c.compile_or(&rest, k.clone())?;
                                Ok(Ir::If {
                                    cond: bx(head.clone()),
                                    then: bx(Ir::Thunk(arc(ret(k, head)))),
                                    els: bx(Ir::Thunk(arc(more))),
                                })
                            })
                        }),
                    )
                })
            }
        }
    }

    fn compile_when(&mut self, args: &[Form], cont: Ir) -> CResult {
        if args.is_empty() {
            compile_bail!("when: expected a condition");
        }
        let mut body = vec![Form::Sym(Symbol::new("do"))];
        body.extend_from_slice(&args[1..]);
        let expanded = [args[0].clone(), Form::List(body), Form::Nil];
        self.compile_if(&expanded, cont)
    }

    fn compile_cond(&mut self, args: &[Form], cont: Ir) -> CResult {
        if !args.len().is_multiple_of(2) {
            compile_bail!("cond: expected an even number of forms");
        }
        match args {
            [] => Ok(ret(cont, Ir::Const(Value::Nil))),
            [_] => compile_bail!("cond: expected an even number of forms"),
            [test, expr, rest @ ..] => {
                let test = test.clone();
                let expr = expr.clone();
                let rest: Vec<Form> = rest.to_vec();
                self.with_bound_cont(cont, move |c, k| {
                    c.chain(
                        &[test],
                        Box::new(move |c, mut trivs| {
                            let then_ir = c.compile(&expr, k.clone())?;
                            let else_ir = c.compile_cond(&rest, k)?;
                            Ok(Ir::If {
                                cond: bx(trivs.pop().unwrap()),
                                then: bx(Ir::Thunk(arc(then_ir))),
                                els: bx(Ir::Thunk(arc(else_ir))),
                            })
                        }),
                    )
                })
            }
        }
    }

    fn compile_case(&mut self, args: &[Form], cont: Ir) -> CResult {
        let Some((scrutinee, clauses)) = args.split_first() else {
            compile_bail!("case: expected an expression to dispatch on");
        };
        let mut constants: Vec<(Value, Form)> = Vec::new();
        let mut default: Option<Form> = None;
        let mut i = 0;
        while i < clauses.len() {
            if i + 1 == clauses.len() {
                default = Some(clauses[i].clone());
            } else {
                let constant = form_to_value(&clauses[i])?;
                if constants
                    .iter()
                    .any(|(c, _)| crate::value::value_eq(c, &constant))
                {
                    compile_bail!("case: duplicate constant {constant}");
                }
                constants.push((constant, clauses[i + 1].clone()));
            }
            i += 2;
        }
        let scrutinee = scrutinee.clone();
        self.with_bound_cont(cont, move |c, k| {
            c.chain(
                &[scrutinee],
                Box::new(move |c, mut trivs| {
                    let head = trivs.pop().unwrap();
                    c.with_simple(head, move |c, head| {
                        c.compile_case_clauses(&head, &constants, default.as_ref(), k)
                    })
                }),
            )
        })
    }

    fn compile_case_clauses(
        &mut self,
        scrutinee: &Ir,
        clauses: &[(Value, Form)],
        default: Option<&Form>,
        k: Ir,
    ) -> CResult {
        let Some(((constant, expr), rest)) = clauses.split_first() else {
            return match default {
                Some(form) => self.compile(form, k),
                None => {
                    let fail =
                        prim_node(primitives::case_fail_primitive(), vec![scrutinee.clone()]);
                    Ok(ret(k, fail))
                }
            };
        };
        let test = prim_node(
            registry_prim("="),
            vec![scrutinee.clone(), Ir::Const(constant.clone())],
        );
        let then_ir = self.compile(expr, k.clone())?;
        let else_ir = self.compile_case_clauses(scrutinee, rest, default, k)?;
        Ok(Ir::If {
            cond: bx(test),
            then: bx(Ir::Thunk(arc(then_ir))),
            els: bx(Ir::Thunk(arc(else_ir))),
        })
    }

    fn compile_sample(&mut self, args: &[Form], cont: Ir) -> CResult {
        let (id_form, dist_form) = match args {
            [dist] => (None, dist.clone()),
            [id, dist] => (Some(id.clone()), dist.clone()),
            _ => compile_bail!("sample: expected (sample dist) or (sample id dist)"),
        };
        match id_form {
            None => {
                let id = Ir::Const(Value::Sym(self.fresh_sym("S")));
                self.chain(
                    &[dist_form],
                    Box::new(move |_, mut trivs| {
                        Ok(Ir::Sample {
                            id: bx(id),
                            dist: bx(trivs.pop().unwrap()),
                            cont: bx(cont),
                            state: bx(state_var()),
                        })
                    }),
                )
            }
            Some(id_form) => self.chain(
                &[id_form, dist_form],
                Box::new(move |_, mut trivs| {
                    let dist = trivs.pop().unwrap();
                    let id = trivs.pop().unwrap();
                    Ok(Ir::Sample {
                        id: bx(id),
                        dist: bx(dist),
                        cont: bx(cont),
                        state: bx(state_var()),
                    })
                }),
            ),
        }
    }

    fn compile_observe(&mut self, args: &[Form], cont: Ir) -> CResult {
        let (id_form, dist_form, value_form) = match args {
            [dist, value] => (None, dist.clone(), value.clone()),
            [id, dist, value] => (Some(id.clone()), dist.clone(), value.clone()),
            _ => compile_bail!("observe: expected (observe dist value) or (observe id dist value)"),
        };
        match id_form {
            None => {
                let id = Ir::Const(Value::Sym(self.fresh_sym("O")));
                self.chain(
                    &[dist_form, value_form],
                    Box::new(move |_, mut trivs| {
                        let value = trivs.pop().unwrap();
                        let dist = trivs.pop().unwrap();
                        Ok(Ir::Observe {
                            id: bx(id),
                            dist: bx(dist),
                            value: bx(value),
                            cont: bx(cont),
                            state: bx(state_var()),
                        })
                    }),
                )
            }
            Some(id_form) => self.chain(
                &[id_form, dist_form, value_form],
                Box::new(move |_, mut trivs| {
                    let value = trivs.pop().unwrap();
                    let dist = trivs.pop().unwrap();
                    let id = trivs.pop().unwrap();
                    Ok(Ir::Observe {
                        id: bx(id),
                        dist: bx(dist),
                        value: bx(value),
                        cont: bx(cont),
                        state: bx(state_var()),
                    })
                }),
            ),
        }
    }

    /// `(mem f)` wraps f so results are cached in the threaded state. Each
    /// evaluation of the mem form mints a fresh key, so two memoized
    /// versions of the same function never share entries.
    fn compile_mem(&mut self, args: &[Form], cont: Ir) -> CResult {
        if args.len() != 1 {
            compile_bail!("mem: expected exactly one function argument");
        }
        let m = self.fresh_sym("M");
        let c = self.fresh_sym("C");
        let p = self.fresh_sym("P");
        let v = self.fresh_sym("V");
        let name = self.fresh_sym("mem");
        let f_form = args[0].clone();
        self.chain(
            &[f_form],
            Box::new(move |_, mut trivs| {
                let f_triv = trivs.pop().unwrap();
                let key_args = vec![state_var(), Ir::Var(m.clone()), Ir::Var(p.clone())];
                let cached = prim_node(registry_prim("get-mem"), key_args.clone());
                let hit = Ir::Thunk(arc(Ir::ContCall {
                    cont: bx(Ir::Var(c.clone())),
                    value: bx(cached),
                    state: bx(state_var()),
                }));
                let remember = prim_node(
                    registry_prim("set-mem"),
                    vec![
                        state_var(),
                        Ir::Var(m.clone()),
                        Ir::Var(p.clone()),
                        Ir::Var(v.clone()),
                    ],
                );
                let after = Arc::new(Lambda {
                    name: None,
                    params: Params {
                        required: vec![Pattern::Sym(v.clone()), Pattern::Sym(state_sym())],
                        rest: None,
                    },
                    body: Ir::Thunk(arc(Ir::ContCall {
                        cont: bx(Ir::Var(c.clone())),
                        value: bx(Ir::Var(v)),
                        state: bx(remember),
                    })),
                });
                let miss = Ir::CpsApply {
                    f: bx(f_triv),
                    cont: bx(Ir::Lambda(after)),
                    state: bx(state_var()),
                    args: Vec::new(),
                    spread: bx(Ir::Var(p.clone())),
                };
                let wrapper = Arc::new(Lambda {
                    name: Some(name),
                    params: Params {
                        required: vec![Pattern::Sym(c), Pattern::Sym(state_sym())],
                        rest: Some(Pattern::Sym(p)),
                    },
                    body: Ir::If {
                        cond: bx(prim_node(registry_prim("in-mem?"), key_args)),
                        then: bx(hit),
                        els: bx(miss),
                    },
                });
                Ok(Ir::Let {
                    bindings: vec![(Pattern::Sym(m), Ir::Gensym { prefix: "M" })],
                    body: bx(ret(cont, Ir::Lambda(wrapper))),
                })
            }),
        )
    }

    /// `(store k .. v)` files v under the key path; the stored value flows on
    /// and the continuation sees the updated state.
    fn compile_store(&mut self, args: &[Form], cont: Ir) -> CResult {
        if args.len() < 2 {
            compile_bail!("store: expected at least one key and a value");
        }
        let args = args.to_vec();
        self.chain(
            &args,
            Box::new(move |_, trivs| {
                let value = trivs.last().cloned().unwrap();
                let mut store_args = vec![state_var()];
                store_args.extend(trivs);
                Ok(Ir::ContCall {
                    cont: bx(cont),
                    value: bx(value),
                    state: bx(prim_node(primitives::store_primitive(), store_args)),
                })
            }),
        )
    }

    fn compile_retrieve(&mut self, args: &[Form], cont: Ir) -> CResult {
        if args.is_empty() {
            compile_bail!("retrieve: expected at least one key");
        }
        let args = args.to_vec();
        self.chain(
            &args,
            Box::new(move |_, trivs| {
                let mut ra = vec![state_var()];
                ra.extend(trivs);
                Ok(ret(cont, prim_node(primitives::retrieve_primitive(), ra)))
            }),
        )
    }

    fn compile_apply(&mut self, args: &[Form], cont: Ir) -> CResult {
        if args.len() < 2 {
            compile_bail!("apply: expected a function and an argument collection");
        }
        let args = args.to_vec();
        self.chain(
            &args,
            Box::new(move |_, mut trivs| {
                let spread = trivs.pop().unwrap();
                let f = trivs.remove(0);
                Ok(Ir::CpsApply {
                    f: bx(f),
                    cont: bx(cont),
                    state: bx(state_var()),
                    args: trivs,
                    spread: bx(spread),
                })
            }),
        )
    }
}

/// Compiles one expression against a named continuation. This is the
/// entry point the compiler tests drive.
pub fn cps_of_expression(form: &Form, cont_name: &str) -> CResult {
    let mut compiler = Compiler::new(HashSet::new());
    compiler.compile_expression(form, Ir::Var(Symbol::new(cont_name)))
}
