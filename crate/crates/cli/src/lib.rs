//! Command-line harness around the `microhub` models.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use microhub::geometry::DistanceMetric;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "microhub", version, about = "Microhub meal-delivery experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample heuristic tours over an (area, nodes) grid and fit the variance law.
    Calibrate(CommonArgs),
    /// Run seeded replications of the discrete-event simulator.
    Simulate(CommonArgs),
    /// Sweep one parameter and tabulate microhub and benchmark metrics.
    Sweep(CommonArgs),
    /// Search the (K, n) grid for the cheapest stable design.
    Optimize(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment config; defaults to the baseline scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tour samples per cell for `calibrate`, simulation runs otherwise.
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub metric: Option<DistanceMetric>,
    /// recalibrated, paper-reference, or a path to a params/fit JSON file.
    #[arg(long)]
    pub params: Option<String>,
}

impl CommonArgs {
    /// Load the config (or defaults) and apply command-line overrides.
    pub fn resolve(&self, calibrate: bool) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replications {
            if calibrate {
                cfg.calibration.replications = r;
            } else {
                cfg.simulation.replications = r;
            }
        }
        if let Some(m) = self.metric {
            cfg.metric = m;
        }
        if let Some(p) = &self.params {
            cfg.params = config::ParamsSource::from(p.as_str());
        }
        Ok(cfg)
    }
}

/// Run one parsed invocation and return a one-line report.
pub fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Calibrate(a) => {
            let r = commands::cmd_calibrate(&a.resolve(true)?, &a.out)?;
            Ok(format!(
                "fit r2_var={:.4} r2_mean={:.4} C*gamma={:.6} alpha={:.4} C*beta={:.6} -> {}",
                r.report.r2_var,
                r.report.r2_mean,
                r.report.c_gamma,
                r.params.alpha,
                r.report.c_beta,
                a.out.display()
            ))
        }
        Command::Simulate(a) => {
            let r = commands::cmd_simulate(&a.resolve(false)?, &a.out)?;
            let g = &r.aggregate;
            Ok(format!(
                "{} runs: W_total={:.4} h (W_a={:.4}, W_q={:.4}, cycle={:.4}, drop-off={:.4}) -> {}",
                g.replications,
                g.w_total.mean,
                g.accumulation_wait.mean,
                g.queue_wait.mean,
                g.pickup_cycle.mean,
                g.dropoff_time.mean,
                a.out.display()
            ))
        }
        Command::Sweep(a) => {
            let r = commands::cmd_sweep(&a.resolve(false)?, &a.out)?;
            let infeasible = r.rows.iter().filter(|row| !row.feasible).count();
            Ok(format!(
                "{} points over {} ({} infeasible) -> {}",
                r.rows.len(),
                r.axis.name(),
                infeasible,
                a.out.display()
            ))
        }
        Command::Optimize(a) => {
            let r = commands::cmd_optimize(&a.resolve(false)?, &a.out)?;
            Ok(format!(
                "best K={} n={} objective={:.2} $/h rho={:.4} -> {}",
                r.best.zones,
                r.best.batch_size,
                r.objective_usd_per_hr,
                r.metrics.rho,
                a.out.display()
            ))
        }
    }
}
