//! Exhaustive integer search over equal-partition designs `(K, n)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca_model::{total_wait, AnalyticMetrics, DesignChoice, MarketScenario, VarianceParams, ZoneDerived};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSearchSpec {
    pub scenario: MarketScenario,
    pub params: VarianceParams,
    /// Zones are searched over `1..=max_zones`.
    pub max_zones: usize,
    /// Batch sizes are searched over `1..=max_batch`.
    pub max_batch: usize,
    /// Highest admissible zone utilization.
    pub rho_cap: f64,
    /// Only admit `K` dividing the fleet (needed when the design will be simulated).
    pub require_divisible: bool,
}

impl DesignSearchSpec {
    /// K up to 36, n up to 50, utilization cap 0.95, any K.
    pub fn new(scenario: MarketScenario, params: VarianceParams) -> Self {
        Self {
            scenario,
            params,
            max_zones: 36,
            max_batch: 50,
            rho_cap: 0.95,
            require_divisible: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.params.validate()?;
        if self.max_zones < 1 || self.max_batch < 1 {
            return Err(invalid(format!(
                "search ranges need max_zones >= 1 and max_batch >= 1, got {} and {}",
                self.max_zones, self.max_batch
            )));
        }
        if !(self.rho_cap > 0.0 && self.rho_cap < 1.0) {
            return Err(invalid(format!("rho_cap must lie in (0, 1), got {}", self.rho_cap)));
        }
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        self.max_zones * self.max_batch
    }
}

/// A feasible design with its evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignCell {
    pub design: DesignChoice,
    pub objective: f64,
    pub metrics: AnalyticMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// Utilization above the cap (including unstable designs).
    Utilization,
    /// `K` does not divide the fleet.
    Indivisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleCell {
    pub design: DesignChoice,
    pub rho: f64,
    pub reason: InfeasibleReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub best: DesignChoice,
    pub objective: f64,
    pub metrics: AnalyticMetrics,
    /// Every feasible cell, ordered by (K, n).
    pub frontier: Vec<DesignCell>,
    /// Every rejected cell, ordered by (K, n).
    pub infeasible: Vec<InfeasibleCell>,
}

impl DesignSolution {
    pub fn infeasible_count(&self) -> usize {
        self.infeasible.len()
    }
}

/// Generalized cost in $/h: `K (π_Q Q_k + π_W λ_k W)`.
pub fn evaluate_design(scenario: &MarketScenario, design: &DesignChoice, params: &VarianceParams) -> Result<f64> {
    Ok(evaluate_with_metrics(scenario, design, params)?.0)
}

fn evaluate_with_metrics(
    scenario: &MarketScenario,
    design: &DesignChoice,
    params: &VarianceParams,
) -> Result<(f64, AnalyticMetrics)> {
    let zone = ZoneDerived::new(scenario, design)?;
    let m = total_wait(scenario, design, params)?;
    let k = design.zones as f64;
    let objective = k * (scenario.cost_per_mile * m.q_zone + scenario.value_of_time * zone.lambda * m.w_total);
    if !objective.is_finite() {
        return Err(invalid(format!("design K={} n={} has a non-finite objective", design.zones, design.batch_size)));
    }
    Ok((objective, m))
}

/// Zone utilization; depends only on the scenario and the design.
fn design_rho(scenario: &MarketScenario, design: &DesignChoice) -> Result<f64> {
    let zone = ZoneDerived::new(scenario, design)?;
    let n = design.batch_size;
    let e_s = crate::ca_model::expected_tour_time(zone.area, n, scenario.speed)?;
    crate::ca_model::utilization(n, zone.delta, zone.fleet, e_s)
}

enum Outcome {
    Feasible(DesignCell),
    Infeasible(InfeasibleCell),
}

fn evaluate_cell(spec: &DesignSearchSpec, design: DesignChoice) -> Result<Outcome> {
    let rho = design_rho(&spec.scenario, &design)?;
    if spec.require_divisible && !(spec.scenario.fleet as usize).is_multiple_of(design.zones) {
        return Ok(Outcome::Infeasible(InfeasibleCell {
            design,
            rho,
            reason: InfeasibleReason::Indivisible,
        }));
    }
    if rho > spec.rho_cap {
        return Ok(Outcome::Infeasible(InfeasibleCell {
            design,
            rho,
            reason: InfeasibleReason::Utilization,
        }));
    }
    let (objective, metrics) = evaluate_with_metrics(&spec.scenario, &design, &spec.params)?;
    Ok(Outcome::Feasible(DesignCell {
        design,
        objective,
        metrics,
    }))
}

/// Smallest objective; ties go to smaller K, then smaller n.
pub fn argmin(cells: &[DesignCell]) -> Option<&DesignCell> {
    cells.iter().min_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then(a.design.zones.cmp(&b.design.zones))
            .then(a.design.batch_size.cmp(&b.design.batch_size))
    })
}

/// Scan every `(K, n)` in range and return the cheapest feasible design.
pub fn solve_design(spec: &DesignSearchSpec) -> Result<DesignSolution> {
    spec.validate()?;
    let designs: Vec<DesignChoice> = (1..=spec.max_zones)
        .flat_map(|k| (1..=spec.max_batch).map(move |n| DesignChoice::new(k, n)))
        .collect();
    let outcomes: Vec<Outcome> = designs
        .into_par_iter()
        .map(|d| evaluate_cell(spec, d))
        .collect::<Result<_>>()?;

    let mut frontier = Vec::new();
    let mut infeasible = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Feasible(c) => frontier.push(c),
            Outcome::Infeasible(c) => infeasible.push(c),
        }
    }
    let best = match argmin(&frontier) {
        Some(b) => *b,
        None => {
            let min_rho = infeasible.iter().map(|c| c.rho).fold(f64::INFINITY, f64::min);
            return Err(Error::NoFeasibleDesign { min_rho });
        }
    };
    Ok(DesignSolution {
        best: best.design,
        objective: best.objective,
        metrics: best.metrics,
        frontier,
        infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_zone_has_no_partition_overhead() {
        let s = MarketScenario::baseline();
        let s = MarketScenario { lambda: 0.1, ..s };
        let d = DesignChoice::new(1, 5);
        let p = VarianceParams::recalibrated();
        let m = total_wait(&s, &d, &p).unwrap();
        let want = s.cost_per_mile * m.q_zone + s.value_of_time * s.lambda * s.area * m.w_total;
        assert!(close(evaluate_design(&s, &d, &p).unwrap(), want, 1e-9));
    }

    #[test]
    fn baseline_zero_variance_objective() {
        let s = MarketScenario::baseline();
        let got = evaluate_design(&s, &DesignChoice::new(4, 10), &VarianceParams::zero()).unwrap();
        // assembled by hand from E[S] = sqrt(250/3)/20, rho = 2E[S]/4:
        // W = 2(0.09 + W_q) + 1.5 E[S], objective = 4 Q_zone + 2000 W
        let e_s = (250.0f64 / 3.0).sqrt() / 20.0;
        let rho = e_s / 2.0;
        let w_q = (10.0 / 2500.0) * 5.0 / (2.0 * (1.0 - rho));
        let w = 2.0 * (0.09 + w_q) + 1.5 * e_s;
        let q_zone = 2.0 * 50.0 * (25.0f64 / 30.0).sqrt();
        let want = 2.0 * 4.0 * q_zone + 2000.0 * w;
        assert!(close(got, want, 1e-9), "{got} vs {want}");
        assert!(close(got, 2511.32, 0.2));
    }

    #[test]
    fn unstable_design_is_an_error() {
        let s = MarketScenario::baseline();
        let err = evaluate_design(&s, &DesignChoice::new(1, 1), &VarianceParams::recalibrated()).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn singleton_grid() {
        let mut spec = DesignSearchSpec::new(
            MarketScenario {
                lambda: 0.1,
                ..MarketScenario::baseline()
            },
            VarianceParams::recalibrated(),
        );
        spec.max_zones = 1;
        spec.max_batch = 1;
        assert_eq!(solve_design(&spec).unwrap().best, DesignChoice::new(1, 1));
        spec.scenario.lambda = 1.0;
        assert!(matches!(solve_design(&spec), Err(Error::NoFeasibleDesign { min_rho }) if min_rho > 1.0));
    }

    #[test]
    fn counts_and_feasibility() {
        let mut spec = DesignSearchSpec::new(MarketScenario::baseline(), VarianceParams::recalibrated());
        spec.require_divisible = true;
        let sol = solve_design(&spec).unwrap();
        assert_eq!(sol.frontier.len() + sol.infeasible_count(), spec.grid_size());
        assert!(sol.frontier.iter().all(|c| c.metrics.rho <= spec.rho_cap && 40 % c.design.zones == 0));
        assert!(sol.infeasible.iter().any(|c| c.reason == InfeasibleReason::Indivisible));
        assert_eq!(40 % sol.best.zones, 0);
    }

    #[test]
    fn bad_spec_rejected() {
        let mut spec = DesignSearchSpec::new(MarketScenario::baseline(), VarianceParams::recalibrated());
        spec.rho_cap = 1.0;
        assert!(solve_design(&spec).is_err());
        spec.rho_cap = 0.9;
        spec.max_zones = 0;
        assert!(solve_design(&spec).is_err());
    }
}
