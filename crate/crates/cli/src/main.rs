//! `hamflow`: batch driver for flows, the nested construction and the estimate verifiers.
//!
//! Every command writes into `--out` (default `out/`); each file carries the tool
//! version and the SHA-256 of the resolved configuration. Exit codes: 0 success, 1 a
//! check failed, 2 configuration error, 3 numerical failure.

mod config;
mod example;
mod fail;
mod flow;
mod inspect;
mod output;
mod source;
mod svg;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hamflow::AxisRect;

use config::RunConfig;
use fail::Failure;
use output::Output;

#[derive(Parser, Debug)]
#[command(name = "hamflow", version, about = "Level-set flows of planar Hamiltonian fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Flow map X(t, ·) on a node grid by the level-set method, the Runge–Kutta oracle or both.
    Flow(RunConfig),
    /// The nested construction and its measured quantities.
    #[command(subcommand)]
    Example(example::ExampleCmd),
    /// Estimate verifiers and the TV refinement study.
    #[command(subcommand)]
    Verify(verify::VerifyCmd),
    /// Sampling and statistics of a field.
    #[command(subcommand)]
    Field(inspect::FieldCmd),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunConfig) {
        match self {
            Command::Flow(c) => ("flow", c),
            Command::Example(e) => e.parts(),
            Command::Verify(v) => v.parts(),
            Command::Field(f) => f.parts(),
        }
    }
}

/// `--window` if given, else `default`.
pub fn window_of(cfg: &RunConfig, default: AxisRect) -> Result<AxisRect, Failure> {
    match &cfg.window {
        Some(w) => Ok(AxisRect::new(w[0], w[1], w[2], w[3])?),
        None => Ok(default),
    }
}

fn run(cli: &Cli) -> Result<Vec<std::path::PathBuf>, Failure> {
    let (name, flags) = cli.command.parts();
    let cfg = RunConfig::resolve(flags)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let mut out = Output::new(cfg.out_dir(), name, cfg.hash(name))?;
    let result = match &cli.command {
        Command::Flow(_) => flow::run(&cfg, &mut out),
        Command::Example(e) => example::run(e, &cfg, &mut out),
        Command::Verify(v) => verify::run(v, &cfg, &mut out),
        Command::Field(f) => inspect::run(f, &cfg, &mut out),
    };
    for p in &out.written {
        println!("{}", p.display());
    }
    result.map(|_| out.written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hamflow: {f}");
            ExitCode::from(f.code)
        }
    }
}
