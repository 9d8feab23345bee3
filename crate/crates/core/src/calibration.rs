//! Monte-Carlo tour statistics over an (area, node count) grid and the
//! least-squares fit of the tour-variance law to them.

use std::collections::BTreeSet;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca_model::{expected_tour_distance, TimeUnit, VarianceParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{derive_seed, sample_uniform_points, stream_rng, streams, DistanceMetric, Region};
use crate::simplex::{minimize_with_restarts, SimplexOptions};
use crate::tsp::solve_tour_heuristic;

/// Restarts of the simplex search, each from a distinct lattice corner.
pub const FIT_STARTS: usize = 20;

const START_C: [f64; 3] = [1.0, 10.0, 100.0];
const START_GAMMA: [f64; 3] = [10.0, 100.0, 1000.0];
const START_ALPHA: [f64; 3] = [1.0, 2.0, 3.0];
const START_BETA: [f64; 3] = [1.0, 10.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub areas: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub replications: usize,
    /// Converts tour length to cycle time.
    pub speed: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            areas: vec![25.0, 50.0, 100.0, 200.0],
            node_counts: vec![5, 10, 20, 50, 100],
            replications: 1000,
            speed: 40.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.areas.is_empty() || self.node_counts.is_empty() {
            return Err(invalid("calibration grid needs at least one area and one node count"));
        }
        if let Some(a) = self.areas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(invalid(format!("calibration areas must be positive, got {a}")));
        }
        if self.node_counts.contains(&0) {
            return Err(invalid("calibration node counts must be at least 1"));
        }
        if self.replications < 2 {
            return Err(invalid("calibration needs at least 2 replications per cell"));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(invalid("calibration speed must be positive"));
        }
        Ok(())
    }
}

/// Sample moments of heuristic tours for one (A, N) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourSampleCell {
    pub area: f64,
    pub nodes: usize,
    pub replications: usize,
    pub mean_time: f64,
    pub var_time: f64,
    pub mean_dist: f64,
    pub var_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourSampleGrid {
    pub seed: u64,
    pub metric: DistanceMetric,
    pub speed: f64,
    pub cells: Vec<TourSampleCell>,
}

/// Mean and unbiased variance.
fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Tours from the centre of a square of area A through N uniform nodes.
///
/// Cell `i` uses seed `derive_seed(seed, i)` and replication `r` within it
/// `derive_seed(cell_seed, r)`, so results do not depend on thread count.
pub fn sample_tours(spec: &GridSpec, metric: DistanceMetric, seed: u64) -> Result<TourSampleGrid> {
    spec.validate()?;
    let cells: Vec<(f64, usize)> = spec
        .areas
        .iter()
        .flat_map(|&a| spec.node_counts.iter().map(move |&n| (a, n)))
        .collect();
    let cells = cells
        .par_iter()
        .enumerate()
        .map(|(ci, &(area, nodes))| {
            let region = Region::square(area)?;
            let cell_seed = derive_seed(seed, ci as u64);
            let lengths = (0..spec.replications)
                .into_par_iter()
                .map(|r| {
                    let rep_seed = derive_seed(cell_seed, r as u64);
                    let mut rng = stream_rng(rep_seed, streams::CALIBRATION_NODES);
                    let pts = sample_uniform_points(&region, nodes, &mut rng);
                    solve_tour_heuristic(region.hub(), &pts, metric, rep_seed).map(|t| t.length)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean_dist, var_dist) = moments(&lengths);
            let v = spec.speed;
            Ok(TourSampleCell {
                area,
                nodes,
                replications: spec.replications,
                mean_time: mean_dist / v,
                var_time: var_dist / (v * v),
                mean_dist,
                var_dist,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TourSampleGrid {
        seed,
        metric,
        speed: spec.speed,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResidual {
    pub area: f64,
    pub nodes: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: VarianceParams,
    /// `C γ` and `C β`. The law is invariant under `C -> sC, γ -> γ/s,
    /// β -> β/s`, so only these products and `α` are determined by data.
    pub c_gamma: f64,
    pub c_beta: f64,
    /// R² of the parameter-free mean law against observed mean times.
    pub r2_mean: f64,
    /// R² of the fitted variance law against observed time variances.
    pub r2_var: f64,
    /// Residual and total sums of squares behind `r2_var`.
    pub sse_var: f64,
    pub sst_var: f64,
    pub residuals: Vec<CellResidual>,
    /// Average relative bias `(observed - law) / law` of mean tour length.
    pub gap_vs_eq1: f64,
    /// Normalized objective at the best start point and at the optimum.
    pub best_start_objective: f64,
    pub objective: f64,
}

fn check_grid(grid: &TourSampleGrid) -> Result<()> {
    if !(grid.speed.is_finite() && grid.speed > 0.0) {
        return Err(invalid("sample grid speed must be positive"));
    }
    let areas: BTreeSet<u64> = grid.cells.iter().map(|c| c.area.to_bits()).collect();
    let nodes: BTreeSet<usize> = grid.cells.iter().map(|c| c.nodes).collect();
    if grid.cells.len() < 8 || areas.len() < 2 || nodes.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need >= 8 cells over >= 2 areas and >= 4 node counts, got {} cells, {} areas, {} node counts",
            grid.cells.len(),
            areas.len(),
            nodes.len()
        )));
    }
    Ok(())
}

fn r_squared(observed: &[f64], predicted: &[f64]) -> (f64, f64, f64) {
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    let sst: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    (1.0 - sse / sst, sse, sst)
}

/// R² of observed mean cycle times against `(2 / (v sqrt 3)) sqrt(A N)`, no free parameters.
pub fn fit_mean_check(grid: &TourSampleGrid) -> Result<f64> {
    check_grid(grid)?;
    let observed: Vec<f64> = grid.cells.iter().map(|c| c.mean_time).collect();
    let predicted = grid
        .cells
        .iter()
        .map(|c| Ok(expected_tour_distance(c.area, c.nodes)? / grid.speed))
        .collect::<Result<Vec<f64>>>()?;
    Ok(r_squared(&observed, &predicted).0)
}

fn params_from(theta: &[f64]) -> VarianceParams {
    VarianceParams {
        c: theta[0].exp(),
        gamma: theta[1].exp(),
        alpha: theta[2].exp(),
        beta: theta[3].exp(),
        time_unit: TimeUnit::Hours,
    }
}

/// Fit `Var[S](A, N) = C A (γ / N^α + β) / v²` to the observed cycle-time
/// variances by least squares.
///
/// The search runs in `(ln C, ln γ, ln α, ln β)` so every constant stays
/// positive. [`FIT_STARTS`] start points are drawn without replacement from
/// the 81-point lattice of the `START_*` tables using the grid seed.
pub fn fit_variance_model(grid: &TourSampleGrid) -> Result<FitReport> {
    check_grid(grid)?;
    let v2 = grid.speed * grid.speed;
    let observed: Vec<f64> = grid.cells.iter().map(|c| c.var_time).collect();
    let scale: f64 = observed.iter().map(|o| o * o).sum();
    if !(scale > 0.0) {
        return Err(Error::InsufficientData("all observed variances are zero".into()));
    }
    let objective = |theta: &[f64]| -> f64 {
        let p = params_from(theta);
        grid.cells
            .iter()
            .zip(&observed)
            .map(|(c, o)| (p.law(c.area, c.nodes as f64) / v2 - o).powi(2))
            .sum::<f64>()
            / scale
    };

    let lattice: Vec<[f64; 4]> = START_C
        .iter()
        .flat_map(|&c| {
            START_GAMMA.iter().flat_map(move |&g| {
                START_ALPHA
                    .iter()
                    .flat_map(move |&a| START_BETA.iter().map(move |&b| [c, g, a, b]))
            })
        })
        .collect();
    let mut rng = stream_rng(grid.seed, streams::FIT_STARTS);
    let picks = index::sample(&mut rng, lattice.len(), FIT_STARTS.min(lattice.len())).into_vec();
    let starts: Vec<Vec<f64>> = picks
        .iter()
        .map(|&i| lattice[i].iter().map(|v| v.ln()).collect())
        .collect();

    let opts = SimplexOptions::default();
    let mut best_start_objective = f64::INFINITY;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        best_start_objective = best_start_objective.min(objective(start));
        let res = minimize_with_restarts(objective, start, &opts, 3);
        if best.as_ref().is_none_or(|(_, v)| res.value < *v) {
            best = Some((res.x, res.value));
        }
    }
    let (theta, value) = best.expect("at least one start");
    let params = params_from(&theta);

    let predicted: Vec<f64> = grid
        .cells
        .iter()
        .map(|c| params.law(c.area, c.nodes as f64) / v2)
        .collect();
    let (r2_var, sse_var, sst_var) = r_squared(&observed, &predicted);
    let residuals = grid
        .cells
        .iter()
        .zip(observed.iter().zip(&predicted))
        .map(|(c, (&o, &p))| CellResidual {
            area: c.area,
            nodes: c.nodes,
            observed: o,
            predicted: p,
        })
        .collect();
    let gap_vs_eq1 = grid
        .cells
        .iter()
        .map(|c| {
            let law = expected_tour_distance(c.area, c.nodes)?;
            Ok((c.mean_dist - law) / law)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / grid.cells.len() as f64;

    Ok(FitReport {
        params,
        c_gamma: params.c_gamma(),
        c_beta: params.c_beta(),
        r2_mean: fit_mean_check(grid)?,
        r2_var,
        sse_var,
        sst_var,
        residuals,
        gap_vs_eq1,
        best_start_objective,
        objective: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(params: &VarianceParams) -> TourSampleGrid {
        let speed = 40.0;
        let cells = [25.0, 50.0, 100.0, 200.0]
            .iter()
            .flat_map(|&a| [5usize, 10, 20, 50, 100].iter().map(move |&n| (a, n)))
            .map(|(a, n)| {
                let mean_dist = expected_tour_distance(a, n).unwrap();
                let var_dist = params.law(a, n as f64);
                TourSampleCell {
                    area: a,
                    nodes: n,
                    replications: 1000,
                    mean_time: mean_dist / speed,
                    var_time: var_dist / (speed * speed),
                    mean_dist,
                    var_dist,
                }
            })
            .collect();
        TourSampleGrid {
            seed: 7,
            metric: DistanceMetric::Manhattan,
            speed,
            cells,
        }
    }

    #[test]
    fn degenerate_grids_rejected() {
        let p = VarianceParams { c: 1.0, gamma: 10.0, alpha: 1.0, beta: 1.0, time_unit: TimeUnit::Hours };
        let mut g = synthetic(&p);
        g.cells.retain(|c| c.area == 25.0);
        assert!(matches!(fit_variance_model(&g), Err(Error::InsufficientData(_))));
        let mut g = synthetic(&p);
        g.cells.retain(|c| c.nodes == 10);
        assert!(matches!(fit_mean_check(&g), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn perfect_means_give_unit_r2() {
        let g = synthetic(&VarianceParams::paper_reference());
        assert!((fit_mean_check(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_unbiased() {
        let (m, v) = moments(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = GridSpec {
            areas: vec![10.0],
            node_counts: vec![3, 6],
            replications: 2,
            speed: 40.0,
        };
        let a = sample_tours(&spec, DistanceMetric::Manhattan, 5).unwrap();
        let b = sample_tours(&spec, DistanceMetric::Manhattan, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.cells.iter().all(|c| c.var_time >= 0.0));
    }

    #[test]
    fn spec_validation() {
        let mut s = GridSpec::default();
        s.replications = 1;
        assert!(s.validate().is_err());
        let mut s = GridSpec::default();
        s.node_counts.push(0);
        assert!(s.validate().is_err());
    }
}
