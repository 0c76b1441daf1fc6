use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracspde::cli::{error_line, parse_override, run, Command, RunSpec};

/// Convergence studies for the stochastic time-fractional diffusion equation.
#[derive(Debug, Parser)]
#[command(name = "fracspde", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a convergence study; writes table.csv and manifest.json.
    Study(RunArgs),
    /// Dump one trajectory at the finest level; writes trajectory.bin and manifest.json.
    Trajectory(RunArgs),
    /// Run the built-in oracle suites.
    Selftest,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn spec(args: Args) -> fracspde::Result<RunSpec> {
    let (command, run_args) = match args.command {
        Cmd::Study(a) => (Command::Study, Some(a)),
        Cmd::Trajectory(a) => (Command::Trajectory, Some(a)),
        Cmd::Selftest => (Command::Selftest, None),
    };
    Ok(match run_args {
        Some(a) => RunSpec {
            command,
            config_path: Some(a.config),
            output_dir: a.out,
            overrides: a
                .set
                .iter()
                .map(|s| parse_override(s))
                .collect::<fracspde::Result<_>>()?,
            threads: a.threads,
        },
        None => RunSpec {
            command,
            config_path: None,
            output_dir: PathBuf::from("."),
            overrides: Vec::new(),
            threads: None,
        },
    })
}

fn main() -> ExitCode {
    let outcome = spec(Args::parse()).and_then(|s| run(&s));
    match outcome {
        Ok(out) => {
            println!("{}", out.summary());
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
