use std::path::Path;

use microhub::ca_model::{
    total_wait, tsppd_benchmark, AnalyticMetrics, DesignChoice, MarketScenario, TsppdMetrics, VarianceParams,
};
use microhub::calibration::{fit_variance_model, sample_tours, FitReport, TourSampleGrid};
use microhub::geometry::derive_seed;
use microhub::optimizer::{evaluate_design, solve_design, DesignSolution};
use microhub::simulator::{run_simulation, SimConfig, SimResult, SimSummary, TraceRow};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, SweepAxis};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, num, opt, write_csv, write_json, MeanStderr, Meta};

pub const SAMPLES_HEADER: [&str; 7] = [
    "area_mi2",
    "nodes",
    "replications",
    "mean_time_hr",
    "var_time_hr2",
    "mean_dist_mi",
    "var_dist_mi2",
];

pub const TRACE_HEADER: [&str; 7] = ["time_hr", "event", "order_id", "zone", "deliverer_id", "x_mi", "y_mi"];

pub const FRONTIER_HEADER: [&str; 7] = ["K", "n", "rho", "Q_total", "W_total", "objective", "feasible"];

pub const SWEEP_HEADER: [&str; 32] = [
    "index",
    "axis",
    "value",
    "K",
    "n",
    "feasible",
    "rho",
    "analytic_w_a",
    "analytic_w_q",
    "analytic_e_s",
    "analytic_w_dropoff",
    "analytic_w_total",
    "analytic_q_total",
    "analytic_q_per_vehicle",
    "objective",
    "sim_replications",
    "sim_w_total_mean",
    "sim_w_total_stderr",
    "sim_accumulation_wait_mean",
    "sim_accumulation_wait_stderr",
    "sim_queue_wait_mean",
    "sim_queue_wait_stderr",
    "sim_pickup_cycle_mean",
    "sim_pickup_cycle_stderr",
    "sim_dropoff_time_mean",
    "sim_dropoff_time_stderr",
    "sim_q_per_vehicle_mean",
    "sim_q_per_vehicle_stderr",
    "tsppd_packages_en_route",
    "tsppd_w_total",
    "tsppd_q_total",
    "tsppd_q_per_vehicle",
];

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Clone, Serialize)]
pub struct CalibrateOutput {
    pub params: VarianceParams,
    pub report: FitReport,
    #[serde(skip)]
    pub samples: TourSampleGrid,
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, out: &Path) -> CliResult<CalibrateOutput> {
    cfg.validate()?;
    let grid = cfg.calibration.to_grid();
    let samples = sample_tours(&grid, cfg.metric, cfg.seed)?;
    let report = fit_variance_model(&samples)?;
    let result = CalibrateOutput {
        params: report.params,
        report,
        samples,
    };

    ensure_dir(out)?;
    let mut meta = Meta::new("calibrate", cfg, result.params);
    meta.params_provenance = "fitted".into();
    let rows: Vec<Vec<String>> = result
        .samples
        .cells
        .iter()
        .map(|c| {
            vec![
                num(c.area),
                c.nodes.to_string(),
                c.replications.to_string(),
                num(c.mean_time),
                num(c.var_time),
                num(c.mean_dist),
                num(c.var_dist),
            ]
        })
        .collect();
    write_csv(out, "samples.csv", &meta, &SAMPLES_HEADER, &rows)?;
    write_json(out, "fit.json", &meta, &result)?;
    Ok(result)
}

// ---------------------------------------------------------------- simulate

/// Per-replication bookkeeping kept in summary.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub replication: usize,
    pub seed: u64,
    pub generated: usize,
    pub completed: usize,
    pub in_flight: usize,
    pub tours_dispatched: usize,
    pub summary: SimSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimAggregate {
    pub replications: usize,
    pub orders_measured: usize,
    pub orders_censored: usize,
    pub w_total: MeanStderr,
    pub accumulation_wait: MeanStderr,
    pub queue_wait: MeanStderr,
    pub pickup_wait: MeanStderr,
    pub pickup_cycle: MeanStderr,
    pub transfer_wait: MeanStderr,
    pub dropoff_time: MeanStderr,
    pub q_total: MeanStderr,
    pub q_per_vehicle: MeanStderr,
}

impl SimAggregate {
    pub fn of(runs: &[SimSummary]) -> Option<Self> {
        let stat = |f: fn(&SimSummary) -> f64| MeanStderr::of(&runs.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            replications: runs.len(),
            orders_measured: runs.iter().map(|r| r.orders_measured).sum(),
            orders_censored: runs.iter().map(|r| r.orders_censored).sum(),
            w_total: stat(|r| r.w_total)?,
            accumulation_wait: stat(|r| r.accumulation_wait)?,
            queue_wait: stat(|r| r.queue_wait)?,
            pickup_wait: stat(|r| r.pickup_wait)?,
            pickup_cycle: stat(|r| r.pickup_cycle)?,
            transfer_wait: stat(|r| r.transfer_wait)?,
            dropoff_time: stat(|r| r.dropoff_time)?,
            q_total: stat(|r| r.q_total)?,
            q_per_vehicle: stat(|r| r.q_per_vehicle)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub scenario: MarketScenario,
    pub design: DesignChoice,
    /// Closed-form prediction for the same design, when it is stable.
    pub analytic: Option<AnalyticMetrics>,
    pub aggregate: SimAggregate,
    pub runs: Vec<RunSummary>,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

fn sim_config(cfg: &ExperimentConfig, scenario: MarketScenario, design: DesignChoice, seed: u64) -> SimConfig {
    SimConfig {
        scenario,
        design,
        horizon: cfg.simulation.horizon_hr,
        warmup: cfg.simulation.warmup_hr,
        drain: cfg.simulation.drain_hr,
        seed,
        metric: cfg.metric,
        record_trace: false,
    }
}

/// Replication `r` runs with seed `derive_seed(base_seed, r)`.
fn replicate(
    cfg: &ExperimentConfig,
    scenario: MarketScenario,
    design: DesignChoice,
    base_seed: u64,
    trace_first: bool,
) -> CliResult<Vec<(RunSummary, SimResult)>> {
    (0..cfg.simulation.replications)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(base_seed, r as u64);
            let mut sc = sim_config(cfg, scenario, design, seed);
            sc.record_trace = trace_first && r == 0;
            let res = run_simulation(&sc)?;
            let summary = RunSummary {
                replication: r,
                seed,
                generated: res.generated(),
                completed: res.completed(),
                in_flight: res.in_flight(),
                tours_dispatched: res.tours_dispatched,
                summary: res.summary.clone(),
            };
            Ok((summary, res))
        })
        .collect()
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<SimulateOutput> {
    cfg.validate()?;
    if cfg.simulation.replications < 1 {
        return Err(CliError::Config("simulate needs simulation.replications >= 1".into()));
    }
    let params = cfg.params.load()?;
    let scenario = cfg.scenario();
    let design = cfg.design.to_design();
    sim_config(cfg, scenario, design, cfg.seed).validate()?;

    let mut runs = replicate(cfg, scenario, design, cfg.seed, cfg.simulation.trace)?;
    let trace = runs.first_mut().and_then(|(_, r)| r.trace.take());
    let runs: Vec<RunSummary> = runs.into_iter().map(|(s, _)| s).collect();
    let summaries: Vec<SimSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let result = SimulateOutput {
        scenario,
        design,
        analytic: total_wait(&scenario, &design, &params).ok(),
        aggregate: SimAggregate::of(&summaries).ok_or_else(|| CliError::Internal("no replications ran".into()))?,
        runs,
        trace,
    };

    ensure_dir(out)?;
    let meta = Meta::new("simulate", cfg, params);
    write_json(out, "summary.json", &meta, &result)?;
    if let Some(trace) = &result.trace {
        let rows: Vec<Vec<String>> = trace
            .iter()
            .map(|t| {
                vec![
                    num(t.time),
                    t.event.name().to_string(),
                    t.order_id.map(|v| v.to_string()).unwrap_or_default(),
                    t.zone.to_string(),
                    t.deliverer_id.map(|v| v.to_string()).unwrap_or_default(),
                    num(t.x),
                    num(t.y),
                ]
            })
            .collect();
        write_csv(out, "trace.csv", &meta, &TRACE_HEADER, &rows)?;
    }
    Ok(result)
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutput {
    pub best: DesignChoice,
    pub objective_usd_per_hr: f64,
    pub metrics: AnalyticMetrics,
    pub grid_size: usize,
    pub frontier_size: usize,
    pub infeasible_count: usize,
    #[serde(skip)]
    pub solution: DesignSolution,
}

pub fn cmd_optimize(cfg: &ExperimentConfig, out: &Path) -> CliResult<OptimizeOutput> {
    cfg.validate()?;
    let params = cfg.params.load()?;
    let spec = cfg.search_spec(cfg.scenario(), params);
    let solution = solve_design(&spec)?;
    let result = OptimizeOutput {
        best: solution.best,
        objective_usd_per_hr: solution.objective,
        metrics: solution.metrics,
        grid_size: spec.grid_size(),
        frontier_size: solution.frontier.len(),
        infeasible_count: solution.infeasible_count(),
        solution,
    };

    ensure_dir(out)?;
    let meta = Meta::new("optimize", cfg, params);
    let mut rows: Vec<(DesignChoice, Vec<String>)> = result
        .solution
        .frontier
        .iter()
        .map(|c| {
            (
                c.design,
                vec![
                    c.design.zones.to_string(),
                    c.design.batch_size.to_string(),
                    num(c.metrics.rho),
                    num(c.metrics.q_total),
                    num(c.metrics.w_total),
                    num(c.objective),
                    "true".into(),
                ],
            )
        })
        .chain(result.solution.infeasible.iter().map(|c| {
            (
                c.design,
                vec![
                    c.design.zones.to_string(),
                    c.design.batch_size.to_string(),
                    num(c.rho),
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".into(),
                ],
            )
        }))
        .collect();
    rows.sort_by_key(|(d, _)| (d.zones, d.batch_size));
    let rows: Vec<Vec<String>> = rows.into_iter().map(|(_, r)| r).collect();
    write_csv(out, "frontier.csv", &meta, &FRONTIER_HEADER, &rows)?;
    write_json(out, "best.json", &meta, &result)?;
    Ok(result)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    /// Design evaluated at this point; absent when no design was feasible.
    pub design: Option<DesignChoice>,
    pub feasible: bool,
    pub analytic: Option<AnalyticMetrics>,
    pub objective: Option<f64>,
    pub sim: Option<SimAggregate>,
    pub tsppd: TsppdMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub optimize_design: bool,
    pub rows: Vec<SweepRow>,
}

fn apply_axis(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> (MarketScenario, DesignChoice) {
    let mut s = cfg.scenario();
    let mut d = cfg.design.to_design();
    match axis {
        SweepAxis::Lambda => s.lambda = value,
        SweepAxis::Fleet => s.fleet = value as u32,
        SweepAxis::Area => s.area = value,
        SweepAxis::Batch => d.batch_size = value as usize,
        SweepAxis::Zones => d.zones = value as usize,
    }
    (s, d)
}

fn sweep_point(
    cfg: &ExperimentConfig,
    params: VarianceParams,
    optimize: bool,
    index: usize,
    value: f64,
) -> CliResult<SweepRow> {
    let axis = cfg.sweep.axis;
    let (scenario, fixed) = apply_axis(cfg, axis, value);
    let tsppd = tsppd_benchmark(&scenario)?;
    let reps = cfg.simulation.replications;

    let (design, analytic, objective) = if optimize {
        let mut spec = cfg.search_spec(scenario, params);
        // simulated points need zones that split the fleet evenly
        spec.require_divisible |= reps > 0;
        match solve_design(&spec) {
            Ok(sol) => (Some(sol.best), Some(sol.metrics), Some(sol.objective)),
            Err(microhub::Error::NoFeasibleDesign { .. }) => (None, None, None),
            Err(e) => return Err(e.into()),
        }
    } else {
        match total_wait(&scenario, &fixed, &params) {
            Ok(m) => (Some(fixed), Some(m), Some(evaluate_design(&scenario, &fixed, &params)?)),
            Err(microhub::Error::Unstable { .. }) => (Some(fixed), None, None),
            Err(e) => return Err(e.into()),
        }
    };
    let feasible = analytic.is_some_and(|m| m.rho <= cfg.search.rho_cap);

    let sim = match design {
        Some(d) if reps > 0 && feasible && (scenario.fleet as usize).is_multiple_of(d.zones) => {
            let runs = replicate(cfg, scenario, d, derive_seed(cfg.seed, index as u64), false)?;
            let summaries: Vec<SimSummary> = runs.into_iter().map(|(s, _)| s.summary).collect();
            SimAggregate::of(&summaries)
        }
        _ => None,
    };

    Ok(SweepRow {
        index,
        value,
        design,
        feasible,
        analytic,
        objective,
        sim,
        tsppd,
    })
}

fn sweep_record(axis: SweepAxis, r: &SweepRow) -> Vec<String> {
    let a = r.analytic;
    let s = r.sim.as_ref();
    let pair = |f: fn(&SimAggregate) -> MeanStderr| -> [String; 2] {
        match s.map(f) {
            Some(ms) => [num(ms.mean), opt(ms.stderr)],
            None => [String::new(), String::new()],
        }
    };
    let mut row = vec![
        r.index.to_string(),
        axis.name().to_string(),
        num(r.value),
        r.design.map(|d| d.zones.to_string()).unwrap_or_default(),
        r.design.map(|d| d.batch_size.to_string()).unwrap_or_default(),
        r.feasible.to_string(),
        opt(a.map(|m| m.rho)),
        opt(a.map(|m| m.w_a)),
        opt(a.map(|m| m.w_q)),
        opt(a.map(|m| m.e_s)),
        opt(a.map(|m| m.w_dropoff)),
        opt(a.map(|m| m.w_total)),
        opt(a.map(|m| m.q_total)),
        opt(a.map(|m| m.q_per_vehicle)),
        opt(r.objective),
        s.map_or(0, |s| s.replications).to_string(),
    ];
    for f in [
        (|s: &SimAggregate| s.w_total) as fn(&SimAggregate) -> MeanStderr,
        |s| s.accumulation_wait,
        |s| s.queue_wait,
        |s| s.pickup_cycle,
        |s| s.dropoff_time,
        |s| s.q_per_vehicle,
    ] {
        row.extend(pair(f));
    }
    row.extend([
        num(r.tsppd.packages_en_route),
        num(r.tsppd.w_total),
        num(r.tsppd.q_total),
        num(r.tsppd.q_per_vehicle),
    ]);
    row
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> CliResult<SweepResult> {
    cfg.validate()?;
    let params = cfg.params.load()?;
    let mut cfg = cfg.clone();
    cfg.sweep = cfg.sweep.resolved();
    let optimize = cfg.sweep.optimize_design.unwrap_or(false);
    let values = cfg.sweep.values();
    let rows = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| sweep_point(&cfg, params, optimize, i, v))
        .collect::<CliResult<Vec<_>>>()?;
    let result = SweepResult {
        axis: cfg.sweep.axis,
        optimize_design: optimize,
        rows,
    };

    ensure_dir(out)?;
    let meta = Meta::new("sweep", &cfg, params);
    let records: Vec<Vec<String>> = result.rows.iter().map(|r| sweep_record(result.axis, r)).collect();
    write_csv(out, "sweep.csv", &meta, &SWEEP_HEADER, &records)?;
    Ok(result)
}
