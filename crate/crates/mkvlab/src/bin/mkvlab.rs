//! Command-line front end: parse a TOML config, route it to its branch,
//! and report the committed output directory.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 failed
//! acceptance criteria. `MKVLAB_THREADS` caps the worker count without
//! changing any result.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mkvlab::io::{dispatch, init_thread_cap, parse_config, RunStatus, Scenario};
use mkvlab::{Error, Result};

#[derive(Parser)]
#[command(name = "mkvlab", version, about = "McKean-Vlasov numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the interacting particle system.
    Simulate(RunArgs),
    /// Solve the measure fixed point by Picard iteration.
    Picard(RunArgs),
    /// Evaluate metrics between the configured laws.
    Metrics(RunArgs),
    /// Run a named experiment and judge its criteria.
    Experiment(RunArgs),
}

impl Command {
    fn scenario(&self) -> Scenario {
        match self {
            Command::Simulate(_) => Scenario::Simulate,
            Command::Picard(_) => Scenario::Picard,
            Command::Metrics(_) => Scenario::Metrics,
            Command::Experiment(_) => Scenario::Experiment,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a) | Command::Picard(a) | Command::Metrics(a)
            | Command::Experiment(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("mkvlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<i32> {
    init_thread_cap()?;
    let scenario = cli.command.scenario();
    let args = cli.command.args();
    let mut config = parse_config(&args.config)?;
    if config.scenario != scenario {
        return Err(Error::Config(format!(
            "config declares scenario '{}' but the subcommand is '{scenario}'",
            config.scenario
        )));
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let outcome = dispatch(&config)?;
    if let RunStatus::Error { message, .. } = &outcome.manifest.status {
        eprintln!("mkvlab: {message}");
    }
    println!(
        "wrote {} files to {}",
        outcome.manifest.outputs.len() + 1,
        outcome.out_dir.display()
    );
    Ok(outcome.exit_code)
}
