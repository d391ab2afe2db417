use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kr_advance_experiments::{
    cutoff_text, optimal_text, parse_scenario_config, report_scenario, run_sweep, run_verification, ScenarioConfig,
};

/// Advance-selling experiments for a loss-averse consumer.
///
/// Exit status: 0 on success, 1 when `verify` finds a failing check,
/// 2 on usage, configuration or solver errors.
#[derive(Parser)]
#[command(name = "kr-advance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and brute-force cutoff advance price at one spot price.
    Cutoff {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        p2: f64,
    },
    /// Cutoff profile over the configured p2 range, written as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seller-optimal prices for the configured regime.
    Optimal {
        #[arg(long)]
        config: PathBuf,
    },
    /// Randomized check suite over seeded parameter draws.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Also write the failing rows to this CSV file.
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Pricing, commitment and benchmark cutoffs for one scenario.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Cutoff { config, p2 } => {
            if !(p2 >= 0.0 && p2.is_finite()) {
                return Err(format!("--p2 must be a non-negative number, got {p2}"));
            }
            print!("{}", cutoff_text(&load(&config)?, p2).map_err(|e| e.to_string())?);
        }
        Command::Sweep { config, out } => {
            let table = run_sweep(&load(&config)?).map_err(|e| e.to_string())?;
            fs::write(&out, table.to_csv()).map_err(|e| format!("{}: {e}", out.display()))?;
            println!(
                "wrote {} rows to {} (max abs_gap {:e})",
                table.rows.len(),
                out.display(),
                table.max_gap()
            );
        }
        Command::Optimal { config } => print!("{}", optimal_text(&load(&config)?)),
        Command::Verify { config, seed, failures } => {
            let report = run_verification(&load(&config)?, seed);
            print!("{}", report.to_text());
            if let Some(path) = failures {
                fs::write(&path, report.failures_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            return Ok(report.exit_code() as u8);
        }
        Command::Report { config } => print!("{}", report_scenario(&load(&config)?).map_err(|e| e.to_string())?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
