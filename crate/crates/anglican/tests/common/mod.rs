//! Helpers shared by the integration suites.
//!
//! `ir_matches` compares pretty-printed compiler output against a template
//! in which `?name` tokens stand for generated symbols, so listings can be
//! pinned without depending on fresh-symbol numbering. The `oracle` module
//! is an independent tree-walking interpreter over source forms, used to
//! cross-check what the compiled programs evaluate to.

#![allow(dead_code)]

use std::collections::HashMap;

/// Source expressions paired with the transformed code they must compile
/// to, written with `?name` placeholders for generated symbols.
pub const CPS_LISTINGS: &[(&str, &str)] = &[
    ("1", "(cont 1 $state)"),
    ("'(+ 1 2)", "(cont '(+ 1 2) $state)"),
    ("[0 1 2]", "(cont (vector 0 1 2) $state)"),
    ("{:a 1, :b 2}", "(cont (hash-map :a 1 :b 2) $state)"),
    ("#{0 1}", "(cont (set (list 0 1)) $state)"),
    ("x", "(cont x $state)"),
    (
        "(fn [x y] (+ x y))",
        "(cont (fn [cont $state x y] (fn [] (cont (+ x y) $state))) $state)",
    ),
    (
        "(fn foo [x] (foo x))",
        "(cont (fn foo [cont $state x] (fn [] (foo cont $state x))) $state)",
    ),
    (
        "(if (adult? person) (cdf person) (cdf-child person))",
        "(adult? (fn [?v $state] (if ?v (fn [] (cdf cont $state person)) \
         (fn [] (cdf-child cont $state person)))) $state person)",
    ),
    (
        "(f (if c t f))",
        "(let [?k (fn [?v $state] (f cont $state ?v))] \
         (if c (fn [] (?k t $state)) (fn [] (?k f $state))))",
    ),
    (
        "(if (if a b c) x y)",
        "(let [?k (fn [?v $state] (if ?v (fn [] (cont x $state)) (fn [] (cont y $state))))] \
         (if a (fn [] (?k b $state)) (fn [] (?k c $state))))",
    ),
    (
        "(let [x 1 y 2] (+ x y))",
        "(let [x 1 y 2] (cont (+ x y) $state))",
    ),
    (
        "(sample (normal 0.0 1.0))",
        "(->sample '?addr (normal 0.0 1.0) cont $state)",
    ),
    (
        "(observe (normal 0.0 1.0) 2.5)",
        "(->observe '?addr (normal 0.0 1.0) 2.5 cont $state)",
    ),
    (
        "(sample :start (flip 0.5))",
        "(->sample :start (flip 0.5) cont $state)",
    ),
    (
        "(observe :obs (normal 0.0 1.0) 2.5)",
        "(->observe :obs (normal 0.0 1.0) 2.5 cont $state)",
    ),
    (
        "(mem foo)",
        "(let [?id (gensym \"M\")] (cont (fn ?mem [?k $state & ?args] \
         (if (in-mem? $state ?id ?args) \
         (fn [] (?k (get-mem $state ?id ?args) $state)) \
         (apply foo (fn [?v $state] (fn [] (?k ?v (set-mem $state ?id ?args ?v)))) \
         $state ?args))) $state))",
    ),
    (
        "(loop [n 0] (if (= n 5) n (recur (+ n 1))))",
        "((fn ?loop [cont $state n] (fn [] (if (= n 5) (fn [] (cont n $state)) \
         (fn [] (?loop cont $state (+ n 1)))))) cont $state 0)",
    ),
    (
        "(and a b)",
        "(if a (fn [] (cont b $state)) (fn [] (cont a $state)))",
    ),
    (
        "(or a b)",
        "(if a (fn [] (cont a $state)) (fn [] (cont b $state)))",
    ),
    (
        "(case x 1 :one 2 :two :other)",
        "(if (= x 1) (fn [] (cont :one $state)) \
         (fn [] (if (= x 2) (fn [] (cont :two $state)) (fn [] (cont :other $state)))))",
    ),
    ("(store :k 1)", "(cont 1 (store $state :k 1))"),
    ("(retrieve :k)", "(cont (retrieve $state :k) $state)"),
    ("(apply f xs)", "(apply f cont $state xs)"),
];

/// Compiles one expression and renders it on a single line.
pub fn compile_one(source: &str) -> String {
    let form = anglican::reader::read_form(source).expect("listing source must read");
    anglican::compiler::cps_of_expression(&form, "cont")
        .expect("listing source must compile")
        .to_string()
}

/// Splits into atoms and bracket tokens; commas count as whitespace.
fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' | '[' | ']' | '{' | '}' => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() || c == ',' => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn split_quote(token: &str) -> (bool, &str) {
    match token.strip_prefix('\'') {
        Some(rest) => (true, rest),
        None => (false, token),
    }
}

/// Structural comparison of pretty-printed IR against a template. Template
/// tokens written `?name` match any single actual token, consistently: the
/// same `?name` always matches the same token and two different `?name`s
/// never match the same one. Everything else must match verbatim.
pub fn ir_matches(actual: &str, template: &str) -> Result<(), String> {
    let got = tokens(actual);
    let want = tokens(template);
    let mut binding: HashMap<String, String> = HashMap::new();
    let mut bound: HashMap<String, String> = HashMap::new();
    for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
        let (gq, gname) = split_quote(g);
        let (wq, wname) = split_quote(w);
        if let Some(placeholder) = wname.strip_prefix('?') {
            if gq != wq {
                return Err(format!("token {i}: quoting of {g:?} does not match {w:?}"));
            }
            match binding.get(placeholder) {
                Some(prev) if prev != gname => {
                    return Err(format!(
                        "token {i}: ?{placeholder} already matched {prev:?}, now {gname:?}"
                    ));
                }
                Some(_) => {}
                None => {
                    if let Some(other) = bound.get(gname) {
                        return Err(format!("token {i}: {gname:?} already taken by ?{other}"));
                    }
                    binding.insert(placeholder.to_string(), gname.to_string());
                    bound.insert(gname.to_string(), placeholder.to_string());
                }
            }
        } else if g != w {
            return Err(format!("token {i}: expected {w:?}, found {g:?}"));
        }
    }
    if got.len() != want.len() {
        return Err(format!(
            "length mismatch: {} tokens compiled vs {} expected\ncompiled:\n{actual}",
            got.len(),
            want.len()
        ));
    }
    Ok(())
}

/// A direct interpreter over source forms: no CPS, no trampoline, host
/// recursion throughout. Random choices are not drawn; they are read from a
/// prepared script, so a compiled run given the same script must agree on
/// both the result and the accumulated observe log-weight.
pub mod oracle {
    use std::cell::{Cell, RefCell};
    use std::collections::VecDeque;
    use std::rc::Rc;

    use anglican::compiler::{form_to_value, prelude::PRELUDE};
    use anglican::reader::{read_forms, Form};
    use anglican::runtime::primitives;
    use anglican::value::{value_eq, Symbol, Value};

    #[derive(Clone)]
    pub enum OVal {
        Data(Value),
        Fun(Rc<Fun>),
        Memo(Rc<Memo>),
    }

    impl OVal {
        fn data(self, what: &str) -> Result<Value, String> {
            match self {
                OVal::Data(v) => Ok(v),
                _ => Err(format!("{what}: expected a plain value, found a function")),
            }
        }

        fn truthy(&self) -> bool {
            match self {
                OVal::Data(v) => v.is_truthy(),
                _ => true,
            }
        }
    }

    pub struct Fun {
        params: Vec<Form>,
        rest: Option<Form>,
        body: Vec<Form>,
        env: Env,
        name: Option<Symbol>,
    }

    pub struct Memo {
        target: OVal,
        cache: RefCell<Vec<(Vec<Value>, OVal)>>,
    }

    #[derive(Clone, Default)]
    pub struct Env(Option<Rc<Node>>);

    struct Node {
        name: Symbol,
        value: OVal,
        parent: Env,
    }

    impl Env {
        fn bind(&self, name: Symbol, value: OVal) -> Env {
            Env(Some(Rc::new(Node {
                name,
                value,
                parent: self.clone(),
            })))
        }

        fn lookup(&self, name: &Symbol) -> Option<OVal> {
            let mut here = self;
            while let Some(node) = &here.0 {
                if node.name == *name {
                    return Some(node.value.clone());
                }
                here = &node.parent;
            }
            None
        }
    }

    enum Flow {
        Val(OVal),
        Recur(Vec<OVal>),
    }

    pub struct Oracle {
        globals: RefCell<Vec<(Symbol, OVal)>>,
        script: RefCell<VecDeque<Value>>,
        log_weight: Cell<f64>,
        store: RefCell<Vec<(Vec<Value>, Value)>>,
        /// Functions that crossed into data space (stored in a collection,
        /// spread through rest arguments), keyed by the opaque symbol that
        /// stands in for them.
        lowered: RefCell<Vec<OVal>>,
    }

    /// Loads definitions (prelude first), then runs the last query against
    /// the scripted sample values. Returns the result and the total
    /// log-weight the observes accumulated.
    pub fn run(source: &str, script: &[Value], arg: Option<Value>) -> Result<(Value, f64), String> {
        let oracle = Oracle {
            globals: RefCell::new(Vec::new()),
            script: RefCell::new(script.iter().cloned().collect()),
            log_weight: Cell::new(0.0),
            store: RefCell::new(Vec::new()),
            lowered: RefCell::new(Vec::new()),
        };
        oracle.load(PRELUDE)?;
        let query = oracle.load(source)?.ok_or("no query in source")?;
        let entry = oracle
            .global(&query)
            .ok_or_else(|| format!("{query} is not defined"))?;
        let args = match entry {
            OVal::Fun(ref f) if f.params.is_empty() && f.rest.is_none() => {
                if arg.is_some() {
                    return Err("query takes no argument".into());
                }
                Vec::new()
            }
            _ => vec![OVal::Data(arg.unwrap_or(Value::Nil))],
        };
        let out = oracle.apply(entry, args)?.data("query result")?;
        Ok((out, oracle.log_weight.get()))
    }

    /// Evaluates one expression with an empty sample script.
    pub fn eval_expression(source: &str) -> Result<Value, String> {
        run(&format!("(defquery q {source})"), &[], None).map(|(v, _)| v)
    }

    impl Oracle {
        fn lower(&self, v: OVal) -> Value {
            match v {
                OVal::Data(d) => d,
                fun => {
                    let mut reg = self.lowered.borrow_mut();
                    reg.push(fun);
                    Value::Sym(Symbol::new(format!("#<fn:{}>", reg.len() - 1)))
                }
            }
        }

        fn raise(&self, v: OVal) -> OVal {
            if let OVal::Data(Value::Sym(s)) = &v {
                let id = s
                    .name()
                    .strip_prefix("#<fn:")
                    .and_then(|r| r.strip_suffix('>'))
                    .and_then(|n| n.parse::<usize>().ok());
                if let Some(fun) = id.and_then(|i| self.lowered.borrow().get(i).cloned()) {
                    return fun;
                }
            }
            v
        }

        fn global(&self, name: &Symbol) -> Option<OVal> {
            self.globals
                .borrow()
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
        }

        /// Reads definitions into globals; returns the last query's name.
        fn load(&self, source: &str) -> Result<Option<Symbol>, String> {
            let forms = read_forms(source).map_err(|e| e.to_string())?;
            let mut last_query = None;
            for form in &forms {
                let Form::List(items) = form else {
                    return Err(format!("not a definition: {form:?}"));
                };
                let head = items
                    .first()
                    .and_then(Form::as_sym)
                    .ok_or("definition must start with a symbol")?;
                let name = items
                    .get(1)
                    .and_then(Form::as_sym)
                    .ok_or("definition needs a name")?
                    .clone();
                let mut rest = &items[2..];
                if let [Form::Str(_), more @ ..] = rest {
                    if !more.is_empty() {
                        rest = more;
                    }
                }
                match head.name() {
                    "defm" => {
                        let [Form::Vector(params), body @ ..] = rest else {
                            return Err(format!("defm {name}: expected a parameter vector"));
                        };
                        let (params, vararg) = split_params(params)?;
                        let fun = Fun {
                            params,
                            rest: vararg,
                            body: body.to_vec(),
                            env: Env::default(),
                            name: Some(name.clone()),
                        };
                        self.globals
                            .borrow_mut()
                            .push((name, OVal::Fun(Rc::new(fun))));
                    }
                    "def" => {
                        let [expr] = rest else {
                            return Err(format!("def {name}: expected one expression"));
                        };
                        let value = self.eval_value(expr, &Env::default())?;
                        self.globals.borrow_mut().push((name, value));
                    }
                    "defquery" => {
                        let (params, body) = match rest {
                            [p @ (Form::Sym(_) | Form::Vector(_)), body @ ..]
                                if !body.is_empty() =>
                            {
                                (vec![p.clone()], body)
                            }
                            body => (Vec::new(), body),
                        };
                        let fun = Fun {
                            params,
                            rest: None,
                            body: body.to_vec(),
                            env: Env::default(),
                            name: Some(name.clone()),
                        };
                        self.globals
                            .borrow_mut()
                            .push((name.clone(), OVal::Fun(Rc::new(fun))));
                        last_query = Some(name);
                    }
                    other => return Err(format!("unknown top-level form {other}")),
                }
            }
            Ok(last_query)
        }

        fn eval_value(&self, form: &Form, env: &Env) -> Result<OVal, String> {
            match self.eval(form, env)? {
                Flow::Val(v) => Ok(v),
                Flow::Recur(_) => Err("recur: no enclosing loop".into()),
            }
        }

        fn eval_data(&self, form: &Form, env: &Env, what: &str) -> Result<Value, String> {
            self.eval_value(form, env)?.data(what)
        }

        fn eval(&self, form: &Form, env: &Env) -> Result<Flow, String> {
            let val = |v: Value| Ok(Flow::Val(OVal::Data(v)));
            match form {
                Form::Nil => val(Value::Nil),
                Form::Bool(b) => val(Value::Bool(*b)),
                Form::Int(i) => val(Value::Int(*i)),
                Form::Real(r) => val(Value::Real(*r)),
                Form::Str(s) => val(Value::string(s)),
                Form::Key(k) => val(Value::Key(k.clone())),
                Form::Quoted(inner) => val(form_to_value(inner).map_err(|e| e.to_string())?),
                Form::Sym(s) => Ok(Flow::Val(self.resolve(s, env)?)),
                Form::Vector(items) => {
                    let vals = self.eval_items(items, env)?;
                    val(Value::vector(vals))
                }
                Form::Set(items) => {
                    let mut vals: Vec<Value> = Vec::new();
                    for item in self.eval_items(items, env)? {
                        if !vals.iter().any(|v| value_eq(v, &item)) {
                            vals.push(item);
                        }
                    }
                    val(Value::Set(vals.into()))
                }
                Form::Map(pairs) => {
                    let mut out = Vec::new();
                    for (k, v) in pairs {
                        out.push((
                            self.eval_data(k, env, "map key")?,
                            self.eval_data(v, env, "map value")?,
                        ));
                    }
                    val(Value::Map(out.into()))
                }
                Form::List(items) => self.eval_list(items, env),
            }
        }

        fn eval_items(&self, items: &[Form], env: &Env) -> Result<Vec<Value>, String> {
            items
                .iter()
                .map(|i| self.eval_value(i, env).map(|v| self.lower(v)))
                .collect()
        }

        fn resolve(&self, name: &Symbol, env: &Env) -> Result<OVal, String> {
            if let Some(v) = env.lookup(name) {
                return Ok(v);
            }
            if let Some(v) = self.global(name) {
                return Ok(v);
            }
            if let Some(p) = primitives::lookup(name.name()) {
                return Ok(OVal::Data(Value::Prim(p)));
            }
            Err(format!("unbound symbol {name}"))
        }

        fn eval_list(&self, items: &[Form], env: &Env) -> Result<Flow, String> {
            let Some(head) = items.first() else {
                return Err("cannot evaluate an empty list".into());
            };
            let args = &items[1..];
            if let Some(sym) = head.as_sym() {
                if env.lookup(sym).is_none() && self.global(sym).is_none() {
                    if let Some(flow) = self.eval_special(sym.name(), args, env)? {
                        return Ok(flow);
                    }
                }
            }
            let callee = self.eval_value(head, env)?;
            let mut vals = Vec::new();
            for a in args {
                vals.push(self.eval_value(a, env)?);
            }
            Ok(Flow::Val(self.apply(callee, vals)?))
        }

        fn eval_special(
            &self,
            name: &str,
            args: &[Form],
            env: &Env,
        ) -> Result<Option<Flow>, String> {
            let flow = match name {
                "if" => match args {
                    [c, t] => {
                        if self.eval_value(c, env)?.truthy() {
                            self.eval(t, env)?
                        } else {
                            Flow::Val(OVal::Data(Value::Nil))
                        }
                    }
                    [c, t, e] => {
                        if self.eval_value(c, env)?.truthy() {
                            self.eval(t, env)?
                        } else {
                            self.eval(e, env)?
                        }
                    }
                    _ => return Err("if: expected two or three forms".into()),
                },
                "when" => match args {
                    [c, body @ ..] => {
                        if self.eval_value(c, env)?.truthy() {
                            self.eval_body(body, env)?
                        } else {
                            Flow::Val(OVal::Data(Value::Nil))
                        }
                    }
                    [] => return Err("when: expected a condition".into()),
                },
                "do" => self.eval_body(args, env)?,
                "and" => {
                    let mut out = OVal::Data(Value::Bool(true));
                    for a in args {
                        out = self.eval_value(a, env)?;
                        if !out.truthy() {
                            break;
                        }
                    }
                    Flow::Val(out)
                }
                "or" => {
                    let mut out = OVal::Data(Value::Nil);
                    for a in args {
                        out = self.eval_value(a, env)?;
                        if out.truthy() {
                            break;
                        }
                    }
                    Flow::Val(out)
                }
                "cond" => {
                    if !args.len().is_multiple_of(2) {
                        return Err("cond: expected an even number of forms".into());
                    }
                    let mut out = Flow::Val(OVal::Data(Value::Nil));
                    for pair in args.chunks(2) {
                        if self.eval_value(&pair[0], env)?.truthy() {
                            out = self.eval(&pair[1], env)?;
                            break;
                        }
                    }
                    out
                }
                "case" => {
                    let [subject, clauses @ ..] = args else {
                        return Err("case: expected a subject".into());
                    };
                    let subject = self.eval_data(subject, env, "case subject")?;
                    let default = (clauses.len() % 2 == 1).then(|| clauses.last().unwrap());
                    let paired = &clauses[..clauses.len() - clauses.len() % 2];
                    for pair in paired.chunks(2) {
                        let test = form_to_value(&pair[0]).map_err(|e| e.to_string())?;
                        if value_eq(&test, &subject) {
                            return Ok(Some(self.eval(&pair[1], env)?));
                        }
                    }
                    match default {
                        Some(d) => self.eval(d, env)?,
                        None => return Err(format!("case: no clause matches {subject}")),
                    }
                }
                "let" => {
                    let [Form::Vector(bindings), body @ ..] = args else {
                        return Err("let: expected a binding vector".into());
                    };
                    if bindings.len() % 2 != 0 {
                        return Err("let: expected an even number of binding forms".into());
                    }
                    let mut scope = env.clone();
                    for pair in bindings.chunks(2) {
                        let value = self.eval_value(&pair[1], &scope)?;
                        scope = bind_pattern(&pair[0], value, &scope)?;
                    }
                    self.eval_body(body, &scope)?
                }
                "fn" => {
                    let (fn_name, rest) = match args {
                        [Form::Sym(n), rest @ ..] => (Some(n.clone()), rest),
                        rest => (None, rest),
                    };
                    let [Form::Vector(params), body @ ..] = rest else {
                        return Err("fn: expected a parameter vector".into());
                    };
                    let (params, vararg) = split_params(params)?;
                    Flow::Val(OVal::Fun(Rc::new(Fun {
                        params,
                        rest: vararg,
                        body: body.to_vec(),
                        env: env.clone(),
                        name: fn_name,
                    })))
                }
                "loop" => {
                    let [Form::Vector(bindings), body @ ..] = args else {
                        return Err("loop: expected a binding vector".into());
                    };
                    if bindings.len() % 2 != 0 {
                        return Err("loop: expected an even number of binding forms".into());
                    }
                    let patterns: Vec<&Form> = bindings.iter().step_by(2).collect();
                    let mut values = Vec::new();
                    for pair in bindings.chunks(2) {
                        values.push(self.eval_value(&pair[1], env)?);
                    }
                    loop {
                        let mut scope = env.clone();
                        for (p, v) in patterns.iter().zip(values.iter()) {
                            scope = bind_pattern(p, v.clone(), &scope)?;
                        }
                        match self.eval_body(body, &scope)? {
                            Flow::Recur(next) => {
                                if next.len() != patterns.len() {
                                    return Err(format!(
                                        "recur: expected {} values, found {}",
                                        patterns.len(),
                                        next.len()
                                    ));
                                }
                                values = next;
                            }
                            done => return Ok(Some(done)),
                        }
                    }
                }
                "recur" => {
                    let mut vals = Vec::new();
                    for a in args {
                        vals.push(self.eval_value(a, env)?);
                    }
                    Flow::Recur(vals)
                }
                "quote" => match args {
                    [inner] => {
                        Flow::Val(OVal::Data(form_to_value(inner).map_err(|e| e.to_string())?))
                    }
                    _ => return Err("quote: expected one form".into()),
                },
                "apply" => {
                    let [f, leading @ .., coll] = args else {
                        return Err("apply: expected a function and arguments".into());
                    };
                    let callee = self.eval_value(f, env)?;
                    let mut vals = Vec::new();
                    for a in leading {
                        vals.push(self.eval_value(a, env)?);
                    }
                    let tail = self.eval_data(coll, env, "apply")?;
                    let items = tail.as_seq().ok_or_else(|| {
                        format!(
                            "apply: last argument must be a sequence, got {}",
                            tail.type_name()
                        )
                    })?;
                    vals.extend(items.iter().cloned().map(OVal::Data));
                    Flow::Val(self.apply(callee, vals)?)
                }
                "sample" => {
                    let dist_form = match args {
                        [dist] => dist,
                        [_id, dist] => dist,
                        _ => return Err("sample: expected a distribution".into()),
                    };
                    let dist = self.eval_data(dist_form, env, "sample")?;
                    let Value::Dist(_) = dist else {
                        return Err(format!(
                            "sample: expected a distribution, got {}",
                            dist.type_name()
                        ));
                    };
                    let drawn = self
                        .script
                        .borrow_mut()
                        .pop_front()
                        .ok_or("sample script exhausted")?;
                    Flow::Val(OVal::Data(drawn))
                }
                "observe" => {
                    let (dist_form, value_form) = match args {
                        [dist, value] => (dist, value),
                        [_id, dist, value] => (dist, value),
                        _ => return Err("observe: expected a distribution and a value".into()),
                    };
                    let dist = self.eval_data(dist_form, env, "observe")?;
                    let Value::Dist(d) = &dist else {
                        return Err(format!(
                            "observe: expected a distribution, got {}",
                            dist.type_name()
                        ));
                    };
                    let value = self.eval_data(value_form, env, "observe")?;
                    self.log_weight
                        .set(self.log_weight.get() + d.observe_star(&value));
                    Flow::Val(OVal::Data(Value::Nil))
                }
                "mem" => {
                    let [f] = args else {
                        return Err("mem: expected one function".into());
                    };
                    let target = self.eval_value(f, env)?;
                    Flow::Val(OVal::Memo(Rc::new(Memo {
                        target,
                        cache: RefCell::new(Vec::new()),
                    })))
                }
                "store" => {
                    if args.len() < 2 {
                        return Err("store: expected keys and a value".into());
                    }
                    let mut vals = Vec::new();
                    for a in args {
                        vals.push(self.eval_data(a, env, "store")?);
                    }
                    let value = vals.pop().unwrap();
                    let mut table = self.store.borrow_mut();
                    match table.iter_mut().find(|(path, _)| {
                        path.len() == vals.len()
                            && path.iter().zip(&vals).all(|(a, b)| value_eq(a, b))
                    }) {
                        Some((_, slot)) => *slot = value.clone(),
                        None => table.push((vals, value.clone())),
                    }
                    Flow::Val(OVal::Data(value))
                }
                "retrieve" => {
                    let mut vals = Vec::new();
                    for a in args {
                        vals.push(self.eval_data(a, env, "retrieve")?);
                    }
                    let table = self.store.borrow();
                    let found = table
                        .iter()
                        .find(|(path, _)| {
                            path.len() == vals.len()
                                && path.iter().zip(&vals).all(|(a, b)| value_eq(a, b))
                        })
                        .map(|(_, v)| v.clone())
                        .unwrap_or(Value::Nil);
                    Flow::Val(OVal::Data(found))
                }
                _ => return Ok(None),
            };
            Ok(Some(flow))
        }

        fn eval_body(&self, body: &[Form], env: &Env) -> Result<Flow, String> {
            let Some((last, leading)) = body.split_last() else {
                return Ok(Flow::Val(OVal::Data(Value::Nil)));
            };
            for form in leading {
                self.eval_value(form, env)?;
            }
            self.eval(last, env)
        }

        fn apply(&self, callee: OVal, args: Vec<OVal>) -> Result<OVal, String> {
            match self.raise(callee) {
                OVal::Data(Value::Prim(p)) => {
                    let vals: Vec<Value> = args.into_iter().map(|a| self.lower(a)).collect();
                    (p.f)(&vals).map(OVal::Data).map_err(|e| e.to_string())
                }
                OVal::Data(other) => {
                    Err(format!("cannot call {} as a function", other.type_name()))
                }
                OVal::Fun(f) => {
                    if args.len() < f.params.len()
                        || (f.rest.is_none() && args.len() > f.params.len())
                    {
                        return Err(format!(
                            "{}: expected {} arguments, found {}",
                            f.name.as_ref().map_or("fn", Symbol::name),
                            f.params.len(),
                            args.len()
                        ));
                    }
                    let mut scope = f.env.clone();
                    if let Some(name) = &f.name {
                        scope = scope.bind(name.clone(), OVal::Fun(f.clone()));
                    }
                    let mut args = args;
                    let extra: Vec<OVal> = args.split_off(f.params.len());
                    for (p, v) in f.params.iter().zip(args) {
                        scope = bind_pattern(p, v, &scope)?;
                    }
                    if let Some(rest_pat) = &f.rest {
                        let items: Vec<Value> = extra.into_iter().map(|a| self.lower(a)).collect();
                        scope = bind_pattern(rest_pat, OVal::Data(Value::list(items)), &scope)?;
                    }
                    match self.eval_body(&f.body, &scope)? {
                        Flow::Val(v) => Ok(v),
                        Flow::Recur(_) => Err("recur: no enclosing loop".into()),
                    }
                }
                OVal::Memo(m) => {
                    let key: Vec<Value> = args.iter().map(|a| self.lower(a.clone())).collect();
                    let hit = m.cache.borrow().iter().find_map(|(k, v)| {
                        let same =
                            k.len() == key.len() && k.iter().zip(&key).all(|(a, b)| value_eq(a, b));
                        same.then(|| v.clone())
                    });
                    if let Some(v) = hit {
                        return Ok(v);
                    }
                    let out = self.apply(m.target.clone(), args)?;
                    m.cache.borrow_mut().push((key, out.clone()));
                    Ok(out)
                }
            }
        }
    }

    fn split_params(params: &[Form]) -> Result<(Vec<Form>, Option<Form>), String> {
        let amp = params
            .iter()
            .position(|p| p.as_sym().is_some_and(|s| s.name() == "&"));
        match amp {
            None => Ok((params.to_vec(), None)),
            Some(i) if i + 2 == params.len() => {
                Ok((params[..i].to_vec(), Some(params[i + 1].clone())))
            }
            Some(_) => Err("parameters: & must precede exactly one pattern".into()),
        }
    }

    fn bind_pattern(pattern: &Form, value: OVal, env: &Env) -> Result<Env, String> {
        match pattern {
            Form::Sym(s) => Ok(env.bind(s.clone(), value)),
            Form::Vector(inner) => {
                let data = value.data("destructuring")?;
                let items: &[Value] = match &data {
                    Value::Nil => &[],
                    other => other.as_seq().ok_or_else(|| {
                        format!("cannot destructure {} as a sequence", other.type_name())
                    })?,
                };
                let (heads, rest) = split_params(inner)?;
                let mut scope = env.clone();
                for (i, p) in heads.iter().enumerate() {
                    let v = items.get(i).cloned().unwrap_or(Value::Nil);
                    scope = bind_pattern(p, OVal::Data(v), &scope)?;
                }
                if let Some(rest_pat) = rest {
                    let tail: Vec<Value> = items.iter().skip(heads.len()).cloned().collect();
                    scope = bind_pattern(&rest_pat, OVal::Data(Value::list(tail)), &scope)?;
                }
                Ok(scope)
            }
            other => Err(format!("unsupported binding pattern {other:?}")),
        }
    }
}
