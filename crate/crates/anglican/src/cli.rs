//! Command-line front end: load a program file, run inference over one of
//! its queries, and emit the weighted samples machine-readably.
//!
//! Exit codes: 0 success, 1 the program failed to read or compile, 2 the
//! inference run itself failed, 3 the flags were invalid.

use std::fs;
use std::io::{self, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compiler::form_to_value;
use crate::compiler::ir::Ir;
use crate::inference::{infer, Algorithm, InferOptions};
use crate::program::{load_program, Program};
use crate::reader::read_form;
use crate::runtime::state::State;
use crate::stat;
use crate::value::Value;

#[derive(Parser)]
#[command(name = "anglican", version, about = "Probabilistic query runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run inference over a query and print one record per sample.
    Run(RunArgs),
    /// Parse and compile a program without running inference.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Program file with defquery/defm/def forms.
    program: String,
    /// Query to run; defaults to the file's only query.
    #[arg(long)]
    query: Option<String>,
    /// Inference algorithm.
    #[arg(long, value_enum, default_value_t = Algo::Importance)]
    algorithm: Algo,
    /// Number of samples to keep.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Leading samples to discard before keeping any.
    #[arg(long, default_value_t = 0)]
    burn: usize,
    /// Particle count per sweep (smc only).
    #[arg(long, default_value_t = 100)]
    particles: usize,
    /// Random seed; the same seed reproduces the output exactly.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint-address padding block size.
    #[arg(long, default_value_t = 16)]
    padding: u64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    output: Format,
    /// Argument passed to the query, written as a source literal.
    #[arg(long)]
    value: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    /// Program file with defquery/defm/def forms.
    program: String,
    /// Query whose compiled form to show; defaults to all queries.
    #[arg(long)]
    query: Option<String>,
    /// Print the compiled form of each query.
    #[arg(long)]
    dump_ir: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Importance,
    Lmh,
    Smc,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Algorithm {
        match a {
            Algo::Importance => Algorithm::Importance,
            Algo::Lmh => Algorithm::Lmh,
            Algo::Smc => Algorithm::Smc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

enum CliError {
    Load(String),
    Runtime(String),
    Usage(String),
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run(args) => run(args),
        Cmd::Check(args) => check(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Load(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    }
}

fn load(path: &str) -> Result<Program, CliError> {
    let source = fs::read_to_string(path).map_err(|e| CliError::Load(format!("{path}: {e}")))?;
    load_program(&source).map_err(|e| CliError::Load(format!("{path}: {e}")))
}

fn select_query<'p>(program: &'p Program, wanted: Option<&str>) -> Result<&'p Value, CliError> {
    let names = || program.query_names().join(", ");
    match wanted {
        Some(name) => program.query(name).ok_or_else(|| {
            CliError::Usage(format!(
                "no query named {name}; the file defines: {}",
                names()
            ))
        }),
        None => program.single_query().ok_or_else(|| {
            if program.queries.is_empty() {
                CliError::Load("the file defines no query".into())
            } else {
                CliError::Usage(format!(
                    "--query is required; the file defines: {}",
                    names()
                ))
            }
        }),
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if args.particles == 0 {
        return Err(CliError::Usage("--particles must be at least 1".into()));
    }
    if args.padding == 0 {
        return Err(CliError::Usage("--padding must be at least 1".into()));
    }
    let arg_value = args
        .value
        .as_deref()
        .map(|text| {
            let form =
                read_form(text).map_err(|e| CliError::Usage(format!("--value: {}", e.message)))?;
            form_to_value(&form).map_err(|e| CliError::Usage(format!("--value: {e}")))
        })
        .transpose()?;

    let program = load(&args.program)?;
    let query = select_query(&program, args.query.as_deref())?;
    let opts = InferOptions {
        seed: args.seed,
        padding: args.padding,
        particles: args.particles,
    };
    let states: Vec<State> = infer(args.algorithm.into(), query, arg_value, &opts)
        .skip(args.burn)
        .take(args.samples)
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let report = match args.output {
        Format::Jsonl => write_jsonl(&mut out, &states),
        Format::Csv => write_csv(&mut out, &states),
    };
    report.map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

fn check(args: CheckArgs) -> Result<(), CliError> {
    let program = load(&args.program)?;
    if let Some(name) = &args.query {
        if program.query(name).is_none() {
            return Err(CliError::Usage(format!(
                "no query named {name}; the file defines: {}",
                program.query_names().join(", ")
            )));
        }
    }
    if args.dump_ir {
        let stdout = io::stdout();
        let mut out = stdout.lock();
        for (name, query) in &program.queries {
            if args.query.as_deref().is_some_and(|q| q != name.name()) {
                continue;
            }
            let Value::Closure(closure) = query else {
                continue;
            };
            let ir = Ir::Lambda(closure.lambda.clone());
            writeln!(out, ";; {name}\n{}", ir.pretty())
                .map_err(|e| CliError::Runtime(format!("writing output: {e}")))?;
        }
    }
    Ok(())
}

/// JSON rendering of result values: sequences and sets become arrays, maps
/// become objects, symbols keep a quote sigil and keywords their colon so
/// the value kind survives the round trip. Non-finite reals become the
/// strings "inf", "-inf", and "nan", which JSON cannot express as numbers.
fn json_value(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::Nil => J::Null,
        Value::Bool(b) => J::Bool(*b),
        Value::Int(i) => J::Number((*i).into()),
        Value::Real(r) => json_real(*r),
        Value::Str(s) => J::String(s.to_string()),
        Value::Sym(s) => J::String(format!("'{s}")),
        Value::Key(k) => J::String(k.to_string()),
        Value::List(xs) | Value::Vector(xs) | Value::Set(xs) => {
            J::Array(xs.iter().map(json_value).collect())
        }
        Value::Map(pairs) => J::Object(
            pairs
                .iter()
                .map(|(k, v)| (json_key(k), json_value(v)))
                .collect(),
        ),
        other => J::String(other.to_string()),
    }
}

fn json_real(x: f64) -> serde_json::Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => serde_json::Value::Number(n),
        None => {
            let s = if x.is_nan() {
                "nan"
            } else if x > 0.0 {
                "inf"
            } else {
                "-inf"
            };
            serde_json::Value::String(s.into())
        }
    }
}

fn json_key(v: &Value) -> String {
    match v {
        Value::Str(s) => s.to_string(),
        Value::Sym(s) => format!("'{s}"),
        other => other.to_string(),
    }
}

/// The summary's per-key means: map-valued results contribute one entry per
/// key whose values are numeric or boolean; bare numeric or boolean results
/// contribute a single "result" entry. All means are weight-normalized.
fn summary_means(states: &[State]) -> serde_json::Map<String, serde_json::Value> {
    let mut keyed: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut push = |key: String, x: f64, lw: f64| match keyed.iter_mut().find(|(k, _)| *k == key) {
        Some((_, samples)) => samples.push((x, lw)),
        None => keyed.push((key, vec![(x, lw)])),
    };
    let numeric = |v: &Value| match v {
        Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
        other => other.as_f64(),
    };
    for state in states {
        let lw = state.log_weight();
        match state.result() {
            Value::Map(pairs) => {
                for (k, v) in pairs.iter() {
                    if let Some(x) = numeric(v) {
                        push(json_key(k), x, lw);
                    }
                }
            }
            other => {
                if let Some(x) = numeric(other) {
                    push("result".into(), x, lw);
                }
            }
        }
    }
    let mut means = serde_json::Map::new();
    for (key, samples) in keyed {
        if let Ok(m) = stat::weighted_mean(&samples) {
            means.insert(key, json_real(m));
        }
    }
    means
}

fn summary(states: &[State]) -> serde_json::Value {
    let lws: Vec<f64> = states.iter().map(|s| s.log_weight()).collect();
    let ess = stat::ess(&lws).map_or(serde_json::Value::Null, json_real);
    serde_json::json!({
        "n": states.len(),
        "ess": ess,
        "means": serde_json::Value::Object(summary_means(states)),
    })
}

fn write_jsonl(out: &mut impl Write, states: &[State]) -> io::Result<()> {
    for (index, state) in states.iter().enumerate() {
        let record = serde_json::json!({
            "index": index,
            "log-weight": json_real(state.log_weight()),
            "result": json_value(state.result()),
        });
        writeln!(out, "{record}")?;
    }
    writeln!(out, "{}", summary(states))
}

fn csv_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_csv(out: &mut impl Write, states: &[State]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "log_weight", "result"])?;
    for (index, state) in states.iter().enumerate() {
        w.write_record(&[
            index.to_string(),
            csv_real(state.log_weight()),
            json_value(state.result()).to_string(),
        ])?;
    }
    w.flush()?;
    eprintln!("{}", summary(states));
    Ok(())
}
