//! Command-line front end: `tqd simulate --scenario <name> ...` and
//! `tqd list-scenarios`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optomech_tqd::scenarios::{self, Scenario, ScenarioConfig};
use optomech_tqd::{Error, Result};

#[derive(Parser)]
#[command(name = "tqd", version, about = "Transitionless intra-cavity state transfer simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV and summary.json.
    Simulate {
        #[arg(long)]
        scenario: String,
        /// JSON config; missing fields take the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override a config field by dotted path, e.g. `rates.n_th=0`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print the scenario catalog.
    ListScenarios,
}

fn simulate(scenario: &str, config: Option<PathBuf>, out: PathBuf, set: &[String]) -> Result<()> {
    let scenario: Scenario = scenario.parse()?;
    let base = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            ScenarioConfig::from_json_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig::default(),
    };
    let cfg = ScenarioConfig { scenario, ..base }.with_overrides(set)?;
    let report = scenarios::run(&cfg)?;
    report.write(&out)?;
    eprintln!("{}: wrote results to {}", scenario, out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<16} {}", s.name(), s.description());
            }
            Ok(())
        }
        Command::Simulate { scenario, config, out, set } => simulate(&scenario, config, out, &set),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
