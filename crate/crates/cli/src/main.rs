#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod error;
mod report;
mod run;
mod store;

use config::{Command, ExperimentConfig, Params, Suite};
use error::CliError;

#[derive(Parser)]
#[command(name = "rmflab", version, about = "Random multiplicative function experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

#[derive(Subcommand)]
enum Cmd {
    /// Numeric checks of constants and identities; exits 1 when any check fails.
    Verify {
        #[arg(value_enum)]
        suite: Option<Suite>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// One sample path: partial sums, change points and sign-change counts.
    Simulate(RunArgs),
    /// Sign-change counts across a seed sweep.
    Signchanges(RunArgs),
    /// Prime zeta values and the log-weighted prime sum grid.
    PrimeSums(RunArgs),
    /// Supremum of the random Euler product over a t grid.
    SupScan(RunArgs),
    /// Oscillation of truncated prime sums along the sigma sequence.
    Chaining(RunArgs),
    /// Tail frequencies against Hoeffding bounds, plus series checks.
    Concentration(RunArgs),
    /// Sequence tables and the interval construction.
    Sequences(RunArgs),
    /// Aggregates persisted runs.
    Report {
        #[arg(long, default_value = "results")]
        output_dir: PathBuf,
    },
}

fn execute(command: Command, suite: Option<Suite>, args: RunArgs) -> Result<(), CliError> {
    let base = match &args.config {
        Some(path) => Params::from_file(path)?,
        None => Params::default(),
    };
    let mut params = base.overlay(args.params);
    if suite.is_some() {
        params.suite = suite;
    }
    let cfg = ExperimentConfig::resolve(command, params)?;
    let out = run::run(&cfg)?;
    let manifest = store::persist(&cfg, &out)?;
    println!("{}", manifest.display());
    match out.passed {
        Some(false) => Err(CliError::VerifyFailed(format!("{} run {} reported failures", command.name(), cfg.hash()))),
        _ => Ok(()),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RMFLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("RMFLAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Resource(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.cmd {
        Cmd::Verify { suite, args } => execute(Command::Verify, suite, args),
        Cmd::Simulate(a) => execute(Command::Simulate, None, a),
        Cmd::Signchanges(a) => execute(Command::Signchanges, None, a),
        Cmd::PrimeSums(a) => execute(Command::PrimeSums, None, a),
        Cmd::SupScan(a) => execute(Command::SupScan, None, a),
        Cmd::Chaining(a) => execute(Command::Chaining, None, a),
        Cmd::Concentration(a) => execute(Command::Concentration, None, a),
        Cmd::Sequences(a) => execute(Command::Sequences, None, a),
        Cmd::Report { output_dir } => {
            let n = report::write_report(&output_dir)?;
            println!("{n} runs -> {}", output_dir.join("report").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
