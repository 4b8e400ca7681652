//! The six CLI commands.

use std::path::{Path, PathBuf};

use dplqr_core::bounds::DEFAULT_PRECISION;
use dplqr_core::sim::SimError;
use dplqr_core::{BoundsReport, MonteCarloSummary, PrivacyLedger, Scenario, SimTrace};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{parse_config, parse_str, ConfigErrors, RunConfig, PAPER_CONFIG};
use crate::output::write_outputs;
use crate::summary::{AssumptionsInfo, BoundsInfo, Constants, GainsInfo, MonteCarloInfo, PrivacyInfo, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Check the schedule and contraction assumptions.
    Validate,
    /// Tabulate gains and sensitivities.
    Gains,
    /// Compute the consensus-error bound and its constants.
    Bounds,
    /// Project the privacy ledger over the configured number of steps.
    Privacy,
    /// Run the Monte Carlo simulation.
    Simulate,
    /// Simulate the embedded four-agent scenario.
    Paper,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Gains => "gains",
            Command::Bounds => "bounds",
            Command::Privacy => "privacy",
            Command::Simulate => "simulate",
            Command::Paper => "paper",
        }
    }
}

/// Command-line overrides of the `sim` section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub no_noise: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("invalid scenario: {0}")]
    Scenario(#[from] SimError),
    #[error("blocking assumptions failed: {}", .0.join(", "))]
    Assumptions(Vec<&'static str>),
    #[error("cannot write output to {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Scenario(_) => "scenario",
            CliError::Assumptions(_) => "assumptions",
            CliError::Io { .. } => "io",
        }
    }

    /// 2 for bad input, 3 for failed assumptions, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Scenario(_) => 2,
            CliError::Assumptions(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let details = match self {
            CliError::Config(e) => serde_json::to_value(e).expect("issues serialize"),
            CliError::Assumptions(failed) => json!(failed),
            _ => json!([]),
        };
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "details": details } })
    }
}

/// Result of a command: the summary, any trial traces, and the blocking
/// assumptions that failed (only `validate` treats these as an error).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub traces: Option<Vec<SimTrace>>,
    pub failed_assumptions: Vec<&'static str>,
}

/// Loads the configuration for `command`, runs it and writes outputs to `out`.
pub fn execute(
    command: Command,
    config: Option<&Path>,
    overrides: Overrides,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let cfg = match (command, config) {
        (Command::Paper, None) => parse_str(PAPER_CONFIG)?,
        (Command::Paper, Some(_)) => {
            return Err(CliError::Usage("paper runs the embedded scenario and takes no --config".into()))
        }
        (_, Some(path)) => parse_config(path)?,
        (_, None) => return Err(CliError::Usage(format!("{} requires --config PATH", command.name()))),
    };
    let outcome = run(command, cfg, overrides)?;
    if let Some(dir) = out {
        write_outputs(dir, &outcome.summary, outcome.traces.as_deref())
            .map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    }
    Ok(outcome)
}

pub fn apply_overrides(mut cfg: RunConfig, o: Overrides) -> Result<RunConfig, CliError> {
    if let Some(steps) = o.steps {
        if steps == 0 {
            return Err(CliError::Usage("--steps must be at least 1".into()));
        }
        cfg.sim.steps = steps;
    }
    if let Some(trials) = o.trials {
        if trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        cfg.sim.trials = trials;
    }
    if let Some(seed) = o.seed {
        cfg.sim.seed = seed;
    }
    if o.no_noise {
        cfg.sim.noise_enabled = false;
    }
    Ok(cfg)
}

/// Runs `command` on an already parsed configuration.
pub fn run(command: Command, cfg: RunConfig, overrides: Overrides) -> Result<Outcome, CliError> {
    let cfg = apply_overrides(cfg, overrides)?;
    let mut summary = Summary::new(command.name(), &cfg.sim);

    if command == Command::Privacy {
        let sim = &cfg.sim;
        let mut ledger = PrivacyLedger::new();
        for t in 0..sim.steps {
            ledger.record(t, sim.epsilon, &sim.schedule).expect("epsilon validated, steps in order");
        }
        summary.privacy = Some(PrivacyInfo::new(&ledger, sim.epsilon, sim.schedule.gamma()));
        return Ok(Outcome { summary, traces: None, failed_assumptions: Vec::new() });
    }

    let require = cfg.require_assumptions;
    let scenario = Scenario::new(cfg.sim)?;
    if command == Command::Gains {
        summary.gains = Some(GainsInfo::from(scenario.gains()));
        return Ok(Outcome { summary, traces: None, failed_assumptions: Vec::new() });
    }

    let report = BoundsReport::compute(&scenario, DEFAULT_PRECISION);
    let assumptions = AssumptionsInfo::from(&report.assumptions);
    let failed = assumptions.failed.clone();
    summary.assumptions = Some(assumptions);
    match command {
        Command::Validate => return Ok(Outcome { summary, traces: None, failed_assumptions: failed }),
        Command::Bounds => {
            summary.constants = Some(Constants::from(&report));
            summary.bounds = Some(BoundsInfo::from(&report));
            return Ok(Outcome { summary, traces: None, failed_assumptions: failed });
        }
        _ => {}
    }

    if require && !failed.is_empty() {
        return Err(CliError::Assumptions(failed));
    }
    let traces = simulate(&scenario);
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.lyapunov().to_vec()).collect();
    let exact: usize = traces.iter().map(SimTrace::exact_release_count).sum();
    let mc = MonteCarloSummary::from_lyapunov(&series);
    let sim = scenario.config();

    summary.constants = Some(Constants::from(&report));
    summary.bounds = Some(BoundsInfo::from(&report));
    summary.monte_carlo = Some(MonteCarloInfo::new(mc, exact, &report));
    summary.privacy = Some(PrivacyInfo::new(traces[0].ledger(), sim.epsilon, sim.schedule.gamma()));
    if command == Command::Paper {
        summary.leakage_window = Some(crate::summary::LeakageWindow::new(sim));
    }
    Ok(Outcome { summary, traces: Some(traces), failed_assumptions: failed })
}

/// Runs every trial on its own stream, in parallel, returned in trial order.
pub fn simulate(scenario: &Scenario) -> Vec<SimTrace> {
    let trials = scenario.config().trials as u64;
    (0..trials).into_par_iter().map(|k| scenario.run_trial(k)).collect()
}
