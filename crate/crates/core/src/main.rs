use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use measdiff::config::{parse_config, Scenario, ScenarioConfig};
use measdiff::scenario::{invariant_failure, run_scenario};
use measdiff::{report, Error, Result};

/// Kicked-system diffusion experiments: classical twist map, coherent and
/// measured quantum evolution, randomized classical map.
#[derive(Debug, Parser)]
#[command(name = "measdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; every key has a default.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (overrides `run.seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Row A: classical twist map ensemble.
    ClassicalTwist,
    /// Row B: coherent quantum evolution.
    QuantumCoherent,
    /// Row C: quantum evolution with a momentum measurement every period.
    QuantumMeasured,
    /// Row D: classical map with a fresh random angle every kick.
    ClassicalRandomized,
    /// Branch expansion of the unitary measurement model vs the master equation.
    UnitaryCheck,
    /// Rows A-D on one system.
    FullTable,
    /// Whatever scenario the configuration names.
    Run,
}

impl Command {
    fn scenario(&self) -> Option<Scenario> {
        Some(match self {
            Command::ClassicalTwist => Scenario::ClassicalTwist,
            Command::QuantumCoherent => Scenario::QuantumCoherent,
            Command::QuantumMeasured => Scenario::QuantumMeasured,
            Command::ClassicalRandomized => Scenario::ClassicalRandomized,
            Command::UnitaryCheck => Scenario::UnitaryModelCheck,
            Command::FullTable => Scenario::FullTable,
            Command::Run => return None,
        })
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(s) = cli.command.scenario() {
        cfg.scenario = s;
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.display().to_string();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<String> {
    let cfg = load(cli)?;
    let result = run_scenario(&cfg)?;
    let text = report::emit_report(&result.outcomes)?;
    print!("{text}");
    match invariant_failure(&result.outcomes) {
        Some(err) => Err(err),
        None => Ok(text),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("--threads: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match outcome {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("measdiff: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
