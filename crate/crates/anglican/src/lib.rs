//! A probabilistic programming toolkit for a Lisp-flavored query language.
//!
//! Programs are read as s-expressions, compiled to a continuation-passing
//! executable form, and run under inference algorithms that intercept the
//! program at its random choice points. Three algorithms are provided:
//! importance sampling, single-site Metropolis-Hastings over the trace
//! database, and a particle filter synchronized at observation barriers.
//!
//! The `examples/` directory is the guided tour: each example is a small,
//! runnable program exercising one capability, from compiling and printing
//! the executable form through running a full posterior estimate. A thin
//! `anglican` binary wraps the same pipeline behind `run` and `check`
//! subcommands for use from the shell.
//!
//! The typical library path is [`program::load_program`] to compile source
//! text, then [`inference::infer`] to open a lazy stream of weighted
//! states, then the [`stat`] helpers to summarize the stream.

pub mod cli;
pub mod compiler;
pub mod inference;
pub mod program;
pub mod reader;
pub mod runtime;
pub mod stat;
pub mod value;
