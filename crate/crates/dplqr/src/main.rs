use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use dplqr::{execute, CliError, Command, Overrides};

/// Differentially private LQR consensus: validation, gains, bounds, privacy
/// accounting and Monte Carlo simulation.
#[derive(Debug, Parser)]
#[command(name = "dplqr", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    #[arg(long, value_name = "T")]
    steps: Option<usize>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Disable the privacy noise.
    #[arg(long)]
    no_noise: bool,
    /// Directory for trace.csv and summary.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return fail(&CliError::Usage(e.kind().to_string() + ": " + e.render().to_string().lines().next().unwrap_or(""))),
    };
    let overrides = Overrides { trials: args.trials, steps: args.steps, seed: args.seed, no_noise: args.no_noise };
    match execute(args.command, args.config.as_deref(), overrides, args.out.as_deref()) {
        Ok(outcome) => {
            print!("{}", dplqr::output::summary_json(&outcome.summary));
            if outcome.failed_assumptions.is_empty() || args.command != Command::Validate {
                ExitCode::SUCCESS
            } else {
                fail(&CliError::Assumptions(outcome.failed_assumptions))
            }
        }
        Err(e) => fail(&e),
    }
}
