use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use paraquat_core::scenario::{self, Overrides, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "paraquat-verify",
    version,
    about = "Numerical checks for paraquaternionic geometry scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a shipped fixture by name) and emit a JSON report.
    Run {
        scenario: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Finite-difference step.
        #[arg(long)]
        step: Option<f64>,
        /// Number of sampled points per check.
        #[arg(long)]
        points: Option<usize>,
    },
    /// List the shipped fixtures.
    Catalog,
    /// Print the anchor, formula and default tolerance of a check.
    Explain { check: String },
}

fn load(target: &str, overrides: &Overrides) -> anyhow::Result<ScenarioConfig> {
    let path = Path::new(target);
    if !path.exists() && scenario::fixture(target).is_some() {
        return Ok(scenario::load_fixture(target, overrides)?);
    }
    scenario::load_scenario_with(path, overrides).with_context(|| format!("loading {target}"))
}

fn run(target: &str, out: Option<&Path>, overrides: Overrides) -> anyhow::Result<i32> {
    let cfg = load(target, &overrides)?;
    let report = scenario::run_scenario(&cfg);
    let json = report.to_json();
    match out {
        Some(p) => {
            std::fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?
        }
        None => println!("{json}"),
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            step,
            points,
        } => run(&scenario, out.as_deref(), Overrides { seed, step, points }),
        Command::Catalog => {
            for name in scenario::fixture_names() {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Explain { check } => match scenario::explain(&check) {
            Some(text) => {
                println!("{text}");
                Ok(0)
            }
            None => Err(anyhow::anyhow!("unknown check `{check}`")),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
