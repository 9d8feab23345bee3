//! Spatial primitives: points, distance metrics, the square service region,
//! equal-area partitions and the uniform / Poisson samplers.
//!
//! Randomness goes through [`stream_rng`]: every consumer derives a ChaCha8
//! generator from `(seed, stream)` so that independent purposes never share
//! a sequence. Stream ids in use are listed in [`streams`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Stream ids handed to [`stream_rng`], one per sampling purpose.
pub mod streams {
    pub const ARRIVAL_TIMES: u64 = 1;
    pub const PICKUP_POINTS: u64 = 2;
    pub const DROPOFF_POINTS: u64 = 3;
    pub const TOUR_RESTARTS: u64 = 4;
    pub const CALIBRATION_NODES: u64 = 5;
    pub const FIT_STARTS: u64 = 6;
}

/// Seedable generator for one sampling purpose.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for replication / cell `index` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A location in miles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    /// L1. The 2/sqrt(3) tour constant of the analytic model is derived for this metric.
    #[default]
    Manhattan,
}

impl DistanceMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Manhattan => "manhattan",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(DistanceMetric::Euclidean),
            "manhattan" | "l1" => Ok(DistanceMetric::Manhattan),
            other => Err(format!("unknown metric `{other}` (expected euclidean or manhattan)")),
        }
    }
}

#[inline]
pub fn distance(a: Point, b: Point, metric: DistanceMetric) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    match metric {
        DistanceMetric::Euclidean => dx.hypot(dy),
        DistanceMetric::Manhattan => dx.abs() + dy.abs(),
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            self.x0 + rng.random::<f64>() * self.width(),
            self.y0 + rng.random::<f64>() * self.height(),
        )
    }
}

/// Square service region of area `A` with the microhub at its centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    area: f64,
    side: f64,
    hub: Point,
}

impl Region {
    pub fn square(area: f64) -> Result<Self> {
        if !(area.is_finite() && area > 0.0) {
            return Err(invalid(format!("region area must be positive, got {area}")));
        }
        let side = area.sqrt();
        Ok(Self {
            area,
            side,
            hub: Point::new(0.5 * side, 0.5 * side),
        })
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn hub(&self) -> Point {
        self.hub
    }

    pub fn bounds(&self) -> Rect {
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: self.side,
            y1: self.side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Layout {
    Grid { per_side: usize },
    Strips,
}

/// Equal-area partition of a [`Region`] into `K` rectangular zones.
///
/// Perfect-square `K` gives a `sqrt(K) x sqrt(K)` grid, anything else gives
/// `K` vertical strips of equal width. Cells are indexed row-major from the
/// origin corner (strips left to right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    region: Region,
    layout: Layout,
    cells: Vec<Rect>,
}

pub fn make_equal_partition(region: Region, zones: usize) -> Result<Partition> {
    if zones == 0 {
        return Err(invalid("partition needs at least one zone"));
    }
    let side = region.side();
    let root = (zones as f64).sqrt().round() as usize;
    let layout = if root * root == zones {
        Layout::Grid { per_side: root }
    } else {
        Layout::Strips
    };
    let edge = |i: usize, parts: usize| side * i as f64 / parts as f64;
    let cells = match layout {
        Layout::Grid { per_side } => (0..per_side)
            .flat_map(|row| {
                (0..per_side).map(move |col| Rect {
                    x0: edge(col, per_side),
                    x1: edge(col + 1, per_side),
                    y0: edge(row, per_side),
                    y1: edge(row + 1, per_side),
                })
            })
            .collect(),
        Layout::Strips => (0..zones)
            .map(|i| Rect {
                x0: edge(i, zones),
                x1: edge(i + 1, zones),
                y0: 0.0,
                y1: side,
            })
            .collect(),
    };
    Ok(Partition {
        region,
        layout,
        cells,
    })
}

impl Partition {
    pub fn zones(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Rect] {
        &self.cells
    }

    pub fn cell(&self, zone: usize) -> &Rect {
        &self.cells[zone]
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Zone index of `p`. Shared boundaries go to the higher-index cell;
    /// points on the outer edge are clamped into the region.
    pub fn zone_of(&self, p: Point) -> usize {
        let side = self.region.side();
        let slot = |coord: f64, parts: usize| -> usize {
            let i = (coord / side * parts as f64).floor();
            if i <= 0.0 {
                0
            } else {
                (i as usize).min(parts - 1)
            }
        };
        match self.layout {
            Layout::Grid { per_side } => slot(p.y, per_side) * per_side + slot(p.x, per_side),
            Layout::Strips => slot(p.x, self.cells.len()),
        }
    }
}

pub fn sample_uniform_points<R: Rng + ?Sized>(region: &Region, count: usize, rng: &mut R) -> Vec<Point> {
    let bounds = region.bounds();
    (0..count).map(|_| bounds.sample(rng)).collect()
}

/// Arrival epochs of a homogeneous Poisson process on `[0, horizon]`, sorted.
pub fn sample_poisson_arrivals<R: Rng + ?Sized>(rate: f64, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(invalid(format!("arrival rate must be nonnegative, got {rate}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if rate == 0.0 {
        return Ok(Vec::new());
    }
    let gap = Exp::new(rate).map_err(|e| invalid(e.to_string()))?;
    let mut times = Vec::with_capacity((rate * horizon * 1.1) as usize + 4);
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > horizon {
            break;
        }
        times.push(t);
    }
    Ok(times)
}
