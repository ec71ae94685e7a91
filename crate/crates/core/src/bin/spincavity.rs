use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use spincavity::runner::{exit_code, run_scenario, thread_cap, EXIT_VALIDATION};
use spincavity::scenario::{Command, Scenario};
use spincavity::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Levels,
    Crossings,
    Hysteresis,
    Fit,
    Dynamics,
    Maser,
    T0scan,
    Peaks,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Levels => Command::Levels,
            Cmd::Crossings => Command::Crossings,
            Cmd::Hysteresis => Command::Hysteresis,
            Cmd::Fit => Command::Fit,
            Cmd::Dynamics => Command::Dynamics,
            Cmd::Maser => Command::Maser,
            Cmd::T0scan => Command::T0Scan,
            Cmd::Peaks => Command::Peaks,
        }
    }
}

/// Level structure, tunneling steps and cavity emission of a swept
/// molecular-magnet crystal.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Cmd,
    /// Scenario file (`key = value` lines in [sections]).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Seed for randomized fit restarts; overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<usize, Error> {
    if let Some(n) = thread_cap()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("cannot size thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&cli.config).map_err(|source| Error::Io {
        path: cli.config.display().to_string(),
        source,
    })?;
    let mut scenario = Scenario::parse(&text, Some(cli.command.into()))?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    Ok(run_scenario(&scenario, &cli.out)?.len())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(n) => {
            eprintln!("wrote {n} files to {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
