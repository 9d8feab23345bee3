//! Closed tours from a depot through a set of nodes.
//!
//! [`solve_tour_heuristic`] is what the simulator and the calibrator use:
//! nearest-neighbour construction followed by 2-opt, repeated from a few
//! seeded starting nodes. [`solve_tour_exact`] enumerates every order and
//! exists to check the heuristic. [`strip_heuristic_tour`] is the swath
//! construction behind the `(2/sqrt 3) sqrt(A N)` length law.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance, stream_rng, streams, DistanceMetric, Point, Rect};

/// Largest node count accepted by [`solve_tour_exact`].
pub const EXACT_NODE_LIMIT: usize = 10;

/// Randomized nearest-neighbour restarts tried after the depot-rooted one.
pub const HEURISTIC_RESTARTS: usize = 3;

const IMPROVEMENT_EPS: f64 = 1e-12;

/// A closed tour `depot -> stops[0] -> ... -> stops[last] -> depot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourPlan {
    pub depot: Point,
    pub stops: Vec<Point>,
    /// Index of each stop in the caller's node list.
    pub order: Vec<usize>,
    pub length: f64,
    pub metric: DistanceMetric,
}

impl TourPlan {
    fn from_order(depot: Point, nodes: &[Point], order: Vec<usize>, metric: DistanceMetric) -> Self {
        let stops: Vec<Point> = order.iter().map(|&i| nodes[i]).collect();
        let length = tour_length(depot, &stops, metric);
        Self {
            depot,
            stops,
            order,
            length,
            metric,
        }
    }

    /// Distance travelled from the depot when each stop is reached.
    pub fn arrival_offsets(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut prev = self.depot;
        self.stops
            .iter()
            .map(|&p| {
                acc += distance(prev, p, self.metric);
                prev = p;
                acc
            })
            .collect()
    }
}

pub fn tour_length(depot: Point, stops: &[Point], metric: DistanceMetric) -> f64 {
    let Some(&last) = stops.last() else {
        return 0.0;
    };
    let mut total = distance(depot, stops[0], metric);
    for w in stops.windows(2) {
        total += distance(w[0], w[1], metric);
    }
    total + distance(last, depot, metric)
}

/// Row-major distance matrix over `[depot, nodes...]`.
struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    fn new(depot: Point, nodes: &[Point], metric: DistanceMetric) -> Self {
        let pts: Vec<Point> = std::iter::once(depot).chain(nodes.iter().copied()).collect();
        let n = pts.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = distance(pts[i], pts[j], metric);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        self.d[a * self.n + b]
    }

    fn cycle_length(&self, route: &[usize]) -> f64 {
        let k = route.len();
        (0..k).map(|i| self.get(route[i], route[(i + 1) % k])).sum()
    }
}

/// Nearest-neighbour route over matrix indices, rooted at the depot (index 0).
/// When `first` is given, that node is visited first. Ties go to the lowest index.
fn nearest_neighbor_route(dist: &Distances, first: Option<usize>) -> Vec<usize> {
    let n = dist.n;
    let mut visited = vec![false; n];
    let mut route = Vec::with_capacity(n);
    route.push(0);
    visited[0] = true;
    if let Some(f) = first {
        route.push(f);
        visited[f] = true;
    }
    while route.len() < n {
        let cur = *route.last().unwrap();
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for j in 1..n {
            if !visited[j] && dist.get(cur, j) < best_d {
                best_d = dist.get(cur, j);
                best = j;
            }
        }
        visited[best] = true;
        route.push(best);
    }
    route
}

/// Best-improvement 2-opt on a closed route whose position 0 (the depot) stays put.
fn two_opt(dist: &Distances, route: &mut [usize]) {
    let k = route.len();
    if k < 4 {
        return;
    }
    loop {
        let mut best_gain = IMPROVEMENT_EPS;
        let mut best_move = None;
        for i in 0..k - 2 {
            let a = route[i];
            let b = route[i + 1];
            let d_ab = dist.get(a, b);
            for j in (i + 2)..k {
                if i == 0 && j == k - 1 {
                    continue;
                }
                let c = route[j];
                let d = route[(j + 1) % k];
                let gain = d_ab + dist.get(c, d) - dist.get(a, c) - dist.get(b, d);
                if gain > best_gain {
                    best_gain = gain;
                    best_move = Some((i, j));
                }
            }
        }
        match best_move {
            Some((i, j)) => route[i + 1..=j].reverse(),
            None => break,
        }
    }
}

/// Largest length reduction available from any single 2-opt exchange of `plan`.
pub fn best_two_opt_gain(plan: &TourPlan) -> f64 {
    let nodes = &plan.stops;
    let dist = Distances::new(plan.depot, nodes, plan.metric);
    let k = dist.n;
    let mut best = 0.0f64;
    for i in 0..k.saturating_sub(2) {
        for j in (i + 2)..k {
            if i == 0 && j == k - 1 {
                continue;
            }
            let (a, b, c, d) = (i, i + 1, j, (j + 1) % k);
            let gain = dist.get(a, b) + dist.get(c, d) - dist.get(a, c) - dist.get(b, d);
            best = best.max(gain);
        }
    }
    best
}

fn check_nodes(nodes: &[Point]) -> Result<()> {
    if nodes.is_empty() {
        return Err(invalid("tour needs at least one node"));
    }
    if nodes.iter().any(|p| !p.is_finite()) {
        return Err(invalid("tour nodes must have finite coordinates"));
    }
    Ok(())
}

/// Nearest-neighbour from the depot, improved by 2-opt, plus
/// [`HEURISTIC_RESTARTS`] seeded restarts from a random first stop. The
/// shortest result wins; earlier restarts win ties.
pub fn solve_tour_heuristic(depot: Point, nodes: &[Point], metric: DistanceMetric, seed: u64) -> Result<TourPlan> {
    check_nodes(nodes)?;
    let dist = Distances::new(depot, nodes, metric);
    let mut best = nearest_neighbor_route(&dist, None);
    two_opt(&dist, &mut best);
    let mut best_len = dist.cycle_length(&best);

    if nodes.len() > 2 {
        let mut rng = stream_rng(seed, streams::TOUR_RESTARTS);
        for _ in 0..HEURISTIC_RESTARTS {
            let first = rng.random_range(1..=nodes.len());
            let mut route = nearest_neighbor_route(&dist, Some(first));
            two_opt(&dist, &mut route);
            let len = dist.cycle_length(&route);
            if len < best_len - IMPROVEMENT_EPS {
                best_len = len;
                best = route;
            }
        }
    }

    let order = best[1..].iter().map(|&i| i - 1).collect();
    Ok(TourPlan::from_order(depot, nodes, order, metric))
}

/// Plain nearest-neighbour tour from the depot, without improvement.
pub fn nearest_neighbor_tour(depot: Point, nodes: &[Point], metric: DistanceMetric) -> Result<TourPlan> {
    check_nodes(nodes)?;
    let dist = Distances::new(depot, nodes, metric);
    let route = nearest_neighbor_route(&dist, None);
    let order = route[1..].iter().map(|&i| i - 1).collect();
    Ok(TourPlan::from_order(depot, nodes, order, metric))
}

/// Globally shortest tour by depth-first enumeration with bound pruning.
/// Only orders whose first stop index is below the last are completed, so
/// each cycle is seen in one direction.
pub fn solve_tour_exact(depot: Point, nodes: &[Point], metric: DistanceMetric) -> Result<TourPlan> {
    check_nodes(nodes)?;
    if nodes.len() > EXACT_NODE_LIMIT {
        return Err(Error::TooManyNodes(nodes.len()));
    }
    let dist = Distances::new(depot, nodes, metric);
    let n = nodes.len();

    struct Search<'a> {
        dist: &'a Distances,
        n: usize,
        used: Vec<bool>,
        path: Vec<usize>,
        best: Vec<usize>,
        best_len: f64,
    }

    impl Search<'_> {
        fn go(&mut self, partial: f64) {
            if partial >= self.best_len {
                return;
            }
            if self.path.len() == self.n {
                if self.n > 1 && self.path[0] > self.path[self.n - 1] {
                    return;
                }
                let total = partial + self.dist.get(*self.path.last().unwrap(), 0);
                if total < self.best_len {
                    self.best_len = total;
                    self.best = self.path.clone();
                }
                return;
            }
            let cur = self.path.last().copied().unwrap_or(0);
            for j in 1..=self.n {
                if self.used[j] {
                    continue;
                }
                self.used[j] = true;
                self.path.push(j);
                self.go(partial + self.dist.get(cur, j));
                self.path.pop();
                self.used[j] = false;
            }
        }
    }

    let mut search = Search {
        dist: &dist,
        n,
        used: vec![false; n + 1],
        path: Vec::with_capacity(n),
        best: Vec::new(),
        best_len: f64::INFINITY,
    };
    search.go(0.0);
    let order = search.best.iter().map(|&i| i - 1).collect();
    Ok(TourPlan::from_order(depot, nodes, order, metric))
}

/// Swath tour inside `cell`, starting and ending at the cell centre.
///
/// The cell is cut into strips parallel to its longer side, of width close
/// to `sqrt(3 / density)`; nodes are visited strip by strip in serpentine
/// order.
pub fn strip_heuristic_tour(cell: &Rect, nodes: &[Point], metric: DistanceMetric) -> Result<TourPlan> {
    check_nodes(nodes)?;
    if !(cell.area() > 0.0) {
        return Err(invalid("strip tour needs a cell with positive area"));
    }
    let density = nodes.len() as f64 / cell.area();
    let optimal_width = (3.0 / density).sqrt();
    // strips run along the long side; `across` is the cut dimension
    let vertical = cell.height() >= cell.width();
    let (across_lo, across_len) = if vertical {
        (cell.x0, cell.width())
    } else {
        (cell.y0, cell.height())
    };
    let strips = ((across_len / optimal_width).round() as usize).max(1);
    let width = across_len / strips as f64;

    let key = |p: &Point| if vertical { (p.x, p.y) } else { (p.y, p.x) };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); strips];
    for (i, p) in nodes.iter().enumerate() {
        let (a, _) = key(p);
        let s = (((a - across_lo) / width).floor().max(0.0) as usize).min(strips - 1);
        buckets[s].push(i);
    }
    let mut order = Vec::with_capacity(nodes.len());
    for (s, bucket) in buckets.iter_mut().enumerate() {
        bucket.sort_by(|&i, &j| key(&nodes[i]).1.total_cmp(&key(&nodes[j]).1).then(i.cmp(&j)));
        if s % 2 == 1 {
            bucket.reverse();
        }
        order.extend_from_slice(bucket);
    }
    Ok(TourPlan::from_order(cell.center(), nodes, order, metric))
}
