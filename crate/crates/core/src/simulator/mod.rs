//! Discrete-event simulation of the microhub system.
//!
//! Orders appear as a spatio-temporal Poisson process over the square
//! region. Every order is visited twice: once at its pickup point by a
//! deliverer of the pickup zone, who brings the package back to the hub at
//! the end of that cycle, and once at its drop-off point by a deliverer of
//! the drop-off zone. A zone dispatches when `n` nodes have accumulated and a
//! deliverer is idle; the batch is routed from the hub by the tour heuristic.
//!
//! Statistics cover orders ready in `(warmup, horizon]`. Arrivals keep
//! coming after the horizon until that cohort is delivered (or the drain
//! allowance runs out) so late orders are not censored.

mod zone;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

pub use zone::{Batch, Dispatch, Node, NodeKind, ZoneState};

use crate::ca_model::{DesignChoice, MarketScenario};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    derive_seed, make_equal_partition, sample_poisson_arrivals, sample_uniform_points, stream_rng, streams,
    DistanceMetric, Partition, Point, Region,
};

const TOUR_SEED_SALT: u64 = 0x7A11_0C0D_E5EE_D000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: MarketScenario,
    pub design: DesignChoice,
    /// Hours.
    pub horizon: f64,
    pub warmup: f64,
    /// Extra simulated hours allowed after the horizon to finish the measured cohort.
    pub drain: f64,
    pub seed: u64,
    pub metric: DistanceMetric,
    pub record_trace: bool,
}

impl SimConfig {
    /// 6 h horizon, 1 h warm-up, drain as long as the horizon.
    pub fn new(scenario: MarketScenario, design: DesignChoice, seed: u64) -> Self {
        Self {
            scenario,
            design,
            horizon: 6.0,
            warmup: 1.0,
            drain: 6.0,
            seed,
            metric: DistanceMetric::default(),
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.design.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(invalid(format!(
                "warmup must lie in [0, horizon), got warmup={} horizon={}",
                self.warmup, self.horizon
            )));
        }
        if !(self.drain.is_finite() && self.drain >= 0.0) {
            return Err(invalid(format!("drain must be nonnegative, got {}", self.drain)));
        }
        let (m, k) = (self.scenario.fleet as usize, self.design.zones);
        if m % k != 0 {
            return Err(invalid(format!(
                "simulation needs the fleet divisible by the zone count, got m={m} K={k}"
            )));
        }
        Ok(())
    }

    fn window(&self) -> f64 {
        self.horizon - self.warmup
    }
}

/// An order to inject: ready time and its two endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSpec {
    pub t_ready: f64,
    pub pickup: Point,
    pub dropoff: Point,
}

/// Lifecycle of a delivered order, all times in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub id: usize,
    pub pickup: Point,
    pub dropoff: Point,
    pub pickup_zone: usize,
    pub dropoff_zone: usize,
    pub t_ready: f64,
    pub t_formed_pickup: f64,
    pub t_dispatch_pickup: f64,
    pub t_picked: f64,
    pub t_at_hub: f64,
    pub t_formed_dropoff: f64,
    pub t_dispatch_dropoff: f64,
    pub t_delivered: f64,
}

impl OrderRecord {
    /// The six lifecycle stamps in order.
    pub fn lifecycle(&self) -> [f64; 6] {
        [
            self.t_ready,
            self.t_dispatch_pickup,
            self.t_picked,
            self.t_at_hub,
            self.t_dispatch_dropoff,
            self.t_delivered,
        ]
    }

    pub fn is_monotone(&self) -> bool {
        self.lifecycle().windows(2).all(|w| w[0] <= w[1])
            && self.t_ready <= self.t_formed_pickup
            && self.t_formed_pickup <= self.t_dispatch_pickup
            && self.t_at_hub <= self.t_formed_dropoff
            && self.t_formed_dropoff <= self.t_dispatch_dropoff
    }

    pub fn total_wait(&self) -> f64 {
        self.t_delivered - self.t_ready
    }

    /// Mean over both stages of the wait for the batch to fill.
    pub fn accumulation_wait(&self) -> f64 {
        0.5 * ((self.t_formed_pickup - self.t_ready) + (self.t_formed_dropoff - self.t_at_hub))
    }

    /// Mean over both stages of the wait of a full batch for a deliverer.
    pub fn queue_wait(&self) -> f64 {
        0.5 * ((self.t_dispatch_pickup - self.t_formed_pickup) + (self.t_dispatch_dropoff - self.t_formed_dropoff))
    }
}

/// Where every generated order is at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateCounts {
    pub generated: usize,
    pub awaiting_pickup: usize,
    pub on_pickup_tour: usize,
    pub at_hub: usize,
    pub on_dropoff_tour: usize,
    pub delivered: usize,
}

impl StateCounts {
    pub fn in_flight(&self) -> usize {
        self.awaiting_pickup + self.on_pickup_tour + self.at_hub + self.on_dropoff_tour
    }

    pub fn is_conserved(&self) -> bool {
        self.generated == self.in_flight() + self.delivered
    }
}

/// Means over the measured cohort (hours), plus work accounting over the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub orders_measured: usize,
    /// Cohort orders still undelivered when the drain allowance ran out.
    pub orders_censored: usize,
    pub w_total: f64,
    /// Ready until the pickup cycle leaves the hub.
    pub pickup_wait: f64,
    /// Pickup cycle dispatch until the package is back at the hub.
    pub pickup_cycle: f64,
    /// At the hub until the drop-off cycle leaves.
    pub transfer_wait: f64,
    /// Drop-off cycle dispatch until delivery.
    pub dropoff_time: f64,
    pub accumulation_wait: f64,
    pub queue_wait: f64,
    /// Vehicle miles per hour inside the window.
    pub q_total: f64,
    pub q_per_vehicle: f64,
    /// Busy fraction of each zone's deliverers inside the window.
    pub zone_utilization: Vec<f64>,
    pub tours_in_window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Arrival,
    Dispatch,
    Pickup,
    Dropoff,
    TourEnd,
    HubTransfer,
}

impl TraceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::Arrival => "arrival",
            TraceEvent::Dispatch => "dispatch",
            TraceEvent::Pickup => "pickup",
            TraceEvent::Dropoff => "dropoff",
            TraceEvent::TourEnd => "tour_end",
            TraceEvent::HubTransfer => "hub_transfer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub event: TraceEvent,
    pub order_id: Option<usize>,
    pub zone: usize,
    pub deliverer_id: Option<usize>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Every order ready by the horizon and delivered before the run ended.
    pub orders: Vec<OrderRecord>,
    pub summary: SimSummary,
    pub at_horizon: StateCounts,
    pub tours_dispatched: usize,
    pub trace: Option<Vec<TraceRow>>,
}

impl SimResult {
    pub fn generated(&self) -> usize {
        self.at_horizon.generated
    }

    pub fn completed(&self) -> usize {
        self.at_horizon.delivered
    }

    pub fn in_flight(&self) -> usize {
        self.at_horizon.in_flight()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Arrival { order: usize },
    NodeVisit { deliverer: usize, stop: usize },
    TourEnd { deliverer: usize },
}

impl EventKind {
    fn priority(&self) -> (u8, usize) {
        match *self {
            EventKind::Arrival { order } => (0, order),
            EventKind::NodeVisit { deliverer, stop } => (1, deliverer * 1_000_000 + stop),
            EventKind::TourEnd { deliverer } => (2, deliverer),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so BinaryHeap pops the earliest (time, type priority, id)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.priority().cmp(&self.kind.priority()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct OrderState {
    pickup: Point,
    dropoff: Point,
    pickup_zone: usize,
    dropoff_zone: usize,
    t_ready: f64,
    formed_pickup: Option<f64>,
    dispatch_pickup: Option<f64>,
    picked: Option<f64>,
    at_hub: Option<f64>,
    formed_dropoff: Option<f64>,
    dispatch_dropoff: Option<f64>,
    delivered: Option<f64>,
}

impl OrderState {
    fn record(&self, id: usize) -> Option<OrderRecord> {
        Some(OrderRecord {
            id,
            pickup: self.pickup,
            dropoff: self.dropoff,
            pickup_zone: self.pickup_zone,
            dropoff_zone: self.dropoff_zone,
            t_ready: self.t_ready,
            t_formed_pickup: self.formed_pickup?,
            t_dispatch_pickup: self.dispatch_pickup?,
            t_picked: self.picked?,
            t_at_hub: self.at_hub?,
            t_formed_dropoff: self.formed_dropoff?,
            t_dispatch_dropoff: self.dispatch_dropoff?,
            t_delivered: self.delivered?,
        })
    }
}

struct TourLog {
    zone: usize,
    start: f64,
    end: f64,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    hub: Point,
    orders: Vec<OrderState>,
    zones: Vec<ZoneState>,
    zone_of_deliverer: Vec<usize>,
    active: Vec<Option<Dispatch>>,
    events: BinaryHeap<Event>,
    counts: StateCounts,
    tours: Vec<TourLog>,
    trace: Option<Vec<TraceRow>>,
}

impl Engine<'_> {
    fn trace(&mut self, time: f64, event: TraceEvent, order: Option<usize>, zone: usize, deliverer: Option<usize>, at: Point) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRow {
                time,
                event,
                order_id: order,
                zone,
                deliverer_id: deliverer,
                x: at.x,
                y: at.y,
            });
        }
    }

    fn enqueue(&mut self, zone: usize, node: Node, now: f64) {
        self.zones[zone].enqueue(node, now);
    }

    fn try_dispatch(&mut self, zone: usize, now: f64) -> Result<()> {
        while self.zones[zone].can_dispatch() {
            let tour_seed = derive_seed(self.cfg.seed ^ TOUR_SEED_SALT, self.tours.len() as u64);
            let d = self.zones[zone].dispatch_batch(self.hub, self.cfg.metric, self.cfg.scenario.speed, now, tour_seed)?;
            for (stop, (node, &t)) in d.nodes.iter().zip(&d.visits).enumerate() {
                let o = &mut self.orders[node.order];
                match node.kind {
                    NodeKind::Pickup => {
                        o.formed_pickup = node.formed;
                        o.dispatch_pickup = Some(now);
                    }
                    NodeKind::Dropoff => {
                        o.formed_dropoff = node.formed;
                        o.dispatch_dropoff = Some(now);
                        self.counts.at_hub -= 1;
                        self.counts.on_dropoff_tour += 1;
                    }
                }
                self.events.push(Event {
                    time: t,
                    kind: EventKind::NodeVisit {
                        deliverer: d.deliverer,
                        stop,
                    },
                });
            }
            self.events.push(Event {
                time: d.end,
                kind: EventKind::TourEnd { deliverer: d.deliverer },
            });
            self.tours.push(TourLog {
                zone,
                start: d.start,
                end: d.end,
            });
            self.trace(now, TraceEvent::Dispatch, None, zone, Some(d.deliverer), self.hub);
            let slot = &mut self.active[d.deliverer];
            if slot.is_some() {
                return Err(Error::Internal(format!("deliverer {} dispatched while busy", d.deliverer)));
            }
            *slot = Some(d);
        }
        Ok(())
    }

    fn handle(&mut self, ev: Event) -> Result<()> {
        let now = ev.time;
        match ev.kind {
            EventKind::Arrival { order } => {
                let o = self.orders[order];
                self.counts.generated += 1;
                self.counts.awaiting_pickup += 1;
                self.trace(now, TraceEvent::Arrival, Some(order), o.pickup_zone, None, o.pickup);
                self.enqueue(o.pickup_zone, Node::new(order, NodeKind::Pickup, o.pickup, now), now);
                self.try_dispatch(o.pickup_zone, now)?;
            }
            EventKind::NodeVisit { deliverer, stop } => {
                let d = self.active[deliverer]
                    .as_ref()
                    .ok_or_else(|| Error::Internal(format!("visit by idle deliverer {deliverer}")))?;
                let node = d.nodes[stop];
                let zone = self.zone_of_deliverer[deliverer];
                let o = &mut self.orders[node.order];
                match node.kind {
                    NodeKind::Pickup => {
                        o.picked = Some(now);
                        self.counts.awaiting_pickup -= 1;
                        self.counts.on_pickup_tour += 1;
                        self.trace(now, TraceEvent::Pickup, Some(node.order), zone, Some(deliverer), node.point);
                    }
                    NodeKind::Dropoff => {
                        o.delivered = Some(now);
                        self.counts.on_dropoff_tour -= 1;
                        self.counts.delivered += 1;
                        self.trace(now, TraceEvent::Dropoff, Some(node.order), zone, Some(deliverer), node.point);
                    }
                }
            }
            EventKind::TourEnd { deliverer } => {
                let d = self.active[deliverer]
                    .take()
                    .ok_or_else(|| Error::Internal(format!("tour end for idle deliverer {deliverer}")))?;
                let zone = self.zone_of_deliverer[deliverer];
                self.trace(now, TraceEvent::TourEnd, None, zone, Some(deliverer), self.hub);
                let mut carried: Vec<usize> = d
                    .nodes
                    .iter()
                    .filter(|n| n.kind == NodeKind::Pickup)
                    .map(|n| n.order)
                    .collect();
                carried.sort_unstable();
                let mut touched = vec![zone];
                for order in carried {
                    let o = &mut self.orders[order];
                    o.at_hub = Some(now);
                    let (dz, dp) = (o.dropoff_zone, o.dropoff);
                    self.counts.on_pickup_tour -= 1;
                    self.counts.at_hub += 1;
                    self.trace(now, TraceEvent::HubTransfer, Some(order), dz, None, self.hub);
                    self.enqueue(dz, Node::new(order, NodeKind::Dropoff, dp, now), now);
                    touched.push(dz);
                }
                self.zones[zone].release(deliverer);
                touched.sort_unstable();
                touched.dedup();
                for z in touched {
                    self.try_dispatch(z, now)?;
                }
            }
        }
        if !self.counts.is_conserved() {
            return Err(Error::Internal(format!("order conservation broken at t={now}: {:?}", self.counts)));
        }
        Ok(())
    }
}

/// Generate Poisson orders over `[0, horizon + drain]` and simulate.
///
/// Streams: arrival epochs use `streams::ARRIVAL_TIMES`, pickup and drop-off
/// locations `PICKUP_POINTS` / `DROPOFF_POINTS`, all from `config.seed`.
pub fn run_simulation(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let region = Region::square(config.scenario.area)?;
    let end = config.horizon + config.drain;
    let times = sample_poisson_arrivals(
        config.scenario.order_rate(),
        end,
        &mut stream_rng(config.seed, streams::ARRIVAL_TIMES),
    )?;
    let pickups = sample_uniform_points(&region, times.len(), &mut stream_rng(config.seed, streams::PICKUP_POINTS));
    let dropoffs = sample_uniform_points(&region, times.len(), &mut stream_rng(config.seed, streams::DROPOFF_POINTS));
    let orders = times
        .iter()
        .zip(pickups.iter().zip(&dropoffs))
        .map(|(&t_ready, (&pickup, &dropoff))| OrderSpec {
            t_ready,
            pickup,
            dropoff,
        })
        .collect();
    run_simulation_with_orders(config, orders)
}

/// Simulate a given order list (sorted by ready time internally).
pub fn run_simulation_with_orders(config: &SimConfig, mut specs: Vec<OrderSpec>) -> Result<SimResult> {
    config.validate()?;
    if specs.iter().any(|s| !(s.t_ready.is_finite() && s.t_ready >= 0.0)) {
        return Err(invalid("order ready times must be finite and nonnegative"));
    }
    specs.sort_by(|a, b| a.t_ready.total_cmp(&b.t_ready));
    let region = Region::square(config.scenario.area)?;
    let partition: Partition = make_equal_partition(region, config.design.zones)?;
    let k = config.design.zones;
    let per_zone = config.scenario.fleet as usize / k;
    let fleet = per_zone * k;

    let inside = |p: &Point| region.bounds().contains(*p);
    if specs.iter().any(|s| !inside(&s.pickup) || !inside(&s.dropoff)) {
        return Err(invalid("order endpoints must lie inside the region"));
    }

    let orders: Vec<OrderState> = specs
        .iter()
        .map(|s| OrderState {
            pickup: s.pickup,
            dropoff: s.dropoff,
            pickup_zone: partition.zone_of(s.pickup),
            dropoff_zone: partition.zone_of(s.dropoff),
            t_ready: s.t_ready,
            ..Default::default()
        })
        .collect();

    let mut engine = Engine {
        cfg: config,
        hub: region.hub(),
        zones: (0..k)
            .map(|z| ZoneState::new(z, config.design.batch_size, z * per_zone..(z + 1) * per_zone))
            .collect(),
        zone_of_deliverer: (0..fleet).map(|d| d / per_zone).collect(),
        active: vec![None; fleet],
        events: orders
            .iter()
            .enumerate()
            .map(|(i, o)| Event {
                time: o.t_ready,
                kind: EventKind::Arrival { order: i },
            })
            .collect(),
        orders,
        counts: StateCounts::default(),
        tours: Vec::new(),
        trace: config.record_trace.then(Vec::new),
    };

    let in_cohort = |t: f64| t > config.warmup && t <= config.horizon;
    let cohort_size = engine.orders.iter().filter(|o| in_cohort(o.t_ready)).count();
    let mut cohort_done = 0usize;
    let mut at_horizon: Option<StateCounts> = None;
    let stop_at = config.horizon + config.drain;

    while let Some(ev) = engine.events.pop() {
        if ev.time > config.horizon && at_horizon.is_none() {
            at_horizon = Some(engine.counts);
        }
        if ev.time > stop_at || (ev.time > config.horizon && cohort_done == cohort_size) {
            break;
        }
        let delivering = match ev.kind {
            EventKind::NodeVisit { deliverer, stop } => engine.active[deliverer]
                .as_ref()
                .map(|d| d.nodes[stop])
                .filter(|n| n.kind == NodeKind::Dropoff),
            _ => None,
        };
        engine.handle(ev)?;
        if let Some(n) = delivering {
            if in_cohort(engine.orders[n.order].t_ready) {
                cohort_done += 1;
            }
        }
    }
    let at_horizon = at_horizon.unwrap_or(engine.counts);

    let records: Vec<OrderRecord> = engine
        .orders
        .iter()
        .enumerate()
        .filter(|(_, o)| o.t_ready <= config.horizon)
        .filter_map(|(i, o)| o.record(i))
        .collect();
    let summary = summarize(config, &records, &engine.tours, per_zone, cohort_size);

    Ok(SimResult {
        orders: records,
        summary,
        at_horizon,
        tours_dispatched: engine.tours.len(),
        trace: engine.trace,
    })
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

fn summarize(cfg: &SimConfig, records: &[OrderRecord], tours: &[TourLog], per_zone: usize, cohort_size: usize) -> SimSummary {
    let cohort: Vec<&OrderRecord> = records
        .iter()
        .filter(|r| r.t_ready > cfg.warmup && r.t_ready <= cfg.horizon)
        .collect();
    let mean = |f: &dyn Fn(&OrderRecord) -> f64| -> f64 {
        if cohort.is_empty() {
            0.0
        } else {
            cohort.iter().map(|r| f(r)).sum::<f64>() / cohort.len() as f64
        }
    };

    let window = cfg.window();
    let mut busy = vec![0.0; cfg.design.zones];
    let mut tours_in_window = 0;
    for t in tours {
        let o = overlap(t.start, t.end, cfg.warmup, cfg.horizon);
        if o > 0.0 {
            tours_in_window += 1;
        }
        busy[t.zone] += o;
    }
    let busy_total: f64 = busy.iter().sum();
    let q_total = cfg.scenario.speed * busy_total / window;

    SimSummary {
        orders_measured: cohort.len(),
        orders_censored: cohort_size - cohort.len(),
        w_total: mean(&|r| r.total_wait()),
        pickup_wait: mean(&|r| r.t_dispatch_pickup - r.t_ready),
        pickup_cycle: mean(&|r| r.t_at_hub - r.t_dispatch_pickup),
        transfer_wait: mean(&|r| r.t_dispatch_dropoff - r.t_at_hub),
        dropoff_time: mean(&|r| r.t_delivered - r.t_dispatch_dropoff),
        accumulation_wait: mean(&|r| r.accumulation_wait()),
        queue_wait: mean(&|r| r.queue_wait()),
        q_total,
        q_per_vehicle: q_total / cfg.scenario.fleet as f64,
        zone_utilization: busy.iter().map(|b| b / (per_zone as f64 * window)).collect(),
        tours_in_window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    fn one_zone(lambda: f64, fleet: u32, n: usize) -> SimConfig {
        SimConfig::new(
            MarketScenario {
                lambda,
                fleet,
                ..MarketScenario::baseline()
            },
            DesignChoice::new(1, n),
            3,
        )
    }

    #[test]
    fn config_validation() {
        let mut c = one_zone(1.0, 40, 10);
        c.warmup = 6.0;
        assert!(c.validate().is_err());
        let mut c = one_zone(1.0, 40, 10);
        c.design.zones = 3;
        assert!(matches!(c.validate(), Err(Error::InvalidArgument(_))));
        c.design.zones = 4;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn no_orders_no_work() {
        let r = run_simulation_with_orders(&one_zone(1.0, 4, 2), Vec::new()).unwrap();
        assert!(r.orders.is_empty());
        assert_eq!(r.summary.q_total, 0.0);
        assert_eq!(r.generated(), 0);
        let r = run_simulation(&one_zone(1e-9, 4, 2)).unwrap();
        assert_eq!(r.completed(), 0);
        assert_eq!(r.summary.q_total, 0.0);
    }

    #[test]
    fn single_order_trace_matches_closed_form() {
        let mut cfg = one_zone(1.0, 1, 1);
        cfg.warmup = 0.0;
        let h = Point::new(5.0, 5.0);
        let p = Point::new(1.0, 2.0);
        let q = Point::new(8.5, 9.0);
        let spec = OrderSpec {
            t_ready: 0.5,
            pickup: p,
            dropoff: q,
        };
        for metric in [DistanceMetric::Euclidean, DistanceMetric::Manhattan] {
            cfg.metric = metric;
            let r = run_simulation_with_orders(&cfg, vec![spec]).unwrap();
            let o = r.orders[0];
            let v = cfg.scenario.speed;
            let want_total = (2.0 * distance(h, p, metric) + distance(h, q, metric)) / v;
            assert!((o.total_wait() - want_total).abs() < 1e-9);
            assert!((o.t_at_hub - o.t_ready - 2.0 * distance(h, p, metric) / v).abs() < 1e-9);
            assert!(o.is_monotone());
            assert_eq!(r.summary.orders_measured, 1);
        }
    }

    #[test]
    fn strict_batch_rule_holds_orders() {
        let mut cfg = one_zone(1.0, 2, 3);
        cfg.drain = 0.0;
        let pts = [Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        let specs = pts
            .iter()
            .enumerate()
            .map(|(i, &p)| OrderSpec {
                t_ready: 1.5 + i as f64,
                pickup: p,
                dropoff: p,
            })
            .collect();
        let r = run_simulation_with_orders(&cfg, specs).unwrap();
        assert_eq!(r.tours_dispatched, 0);
        assert_eq!(r.at_horizon.awaiting_pickup, 2);
        assert_eq!(r.summary.orders_censored, 2);
    }

    #[test]
    fn dropoff_only_tour_delivers_before_tour_end() {
        let mut cfg = SimConfig::new(MarketScenario::baseline(), DesignChoice::new(4, 2), 11);
        cfg.record_trace = true;
        let r = run_simulation(&cfg).unwrap();
        let trace = r.trace.as_ref().unwrap();
        for row in trace.iter().filter(|t| t.event == TraceEvent::Dropoff && t.time < cfg.horizon) {
            let end = trace
                .iter()
                .find(|t| t.event == TraceEvent::TourEnd && t.deliverer_id == row.deliverer_id && t.time >= row.time)
                .expect("tour end after every drop-off");
            assert!(row.time < end.time);
        }
    }
}
