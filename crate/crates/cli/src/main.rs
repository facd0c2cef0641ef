//! `softsense` command-line entry point.

mod args;
mod common;
mod config;
mod error;
mod learn;
mod lens;
mod probe;
mod simulate;

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command};
use error::{exit_code, UsageError};

/// Environment variable fixing the worker thread count.
const THREADS_ENV: &str = "SOFTSENSE_THREADS";

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = match value.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return Err(UsageError(format!("{THREADS_ENV} must be a positive integer, got `{value}`")).into()),
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("starting worker threads")
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Train(a) => learn::train(a),
        Command::Eval(a) => learn::eval(a),
        Command::Embed(a) => lens::embed(a),
        Command::Mi(a) => lens::mi(a),
        Command::Probe(a) => probe::probe(a),
        Command::Rollout(a) => probe::rollout_cmd(a),
    }
}

/// The error chain on one line, skipping causes already quoted by the
/// message before them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            exit_code(&err)
        }
    }
}
