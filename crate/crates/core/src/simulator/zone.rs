use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DistanceMetric, Point};
use crate::tsp::{solve_tour_heuristic, TourPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    /// Restaurant visit; the package travels back to the hub.
    Pickup,
    /// Customer visit with a package loaded at the hub.
    Dropoff,
}

/// One pending visit in a zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub order: usize,
    pub kind: NodeKind,
    pub point: Point,
    /// When the node became visitable (order ready, or package at hub).
    pub ready: f64,
    /// When the node's batch reached `n` members.
    pub formed: Option<f64>,
}

impl Node {
    pub fn new(order: usize, kind: NodeKind, point: Point, ready: f64) -> Self {
        Self {
            order,
            kind,
            point,
            ready,
            formed: None,
        }
    }

    fn fifo_key(&self) -> (f64, usize) {
        (self.ready, self.order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub formed: f64,
    pub nodes: Vec<Node>,
}

/// A cycle handed to a deliverer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub deliverer: usize,
    pub start: f64,
    pub end: f64,
    /// Batch nodes in tour order.
    pub nodes: Vec<Node>,
    /// Arrival time at each node, aligned with `nodes`.
    pub visits: Vec<f64>,
    pub plan: TourPlan,
}

/// Queue state of one sub-area: nodes waiting to fill a batch, full batches
/// waiting for a deliverer, and the zone's idle deliverers.
#[derive(Debug, Clone)]
pub struct ZoneState {
    pub id: usize,
    batch_size: usize,
    unassigned: VecDeque<Node>,
    formed: VecDeque<Batch>,
    idle: BTreeSet<usize>,
}

impl ZoneState {
    pub fn new(id: usize, batch_size: usize, deliverers: impl IntoIterator<Item = usize>) -> Self {
        assert!(batch_size >= 1);
        Self {
            id,
            batch_size,
            unassigned: VecDeque::new(),
            formed: VecDeque::new(),
            idle: deliverers.into_iter().collect(),
        }
    }

    /// Ready pickups plus hub packages destined here, not yet dispatched.
    pub fn pending_nodes(&self) -> usize {
        self.unassigned.len() + self.formed.iter().map(|b| b.nodes.len()).sum::<usize>()
    }

    pub fn formed_batches(&self) -> usize {
        self.formed.len()
    }

    pub fn idle_deliverers(&self) -> usize {
        self.idle.len()
    }

    /// Add a node in FIFO position `(ready, order)` and close every full batch.
    /// Returns the number of batches formed.
    pub fn enqueue(&mut self, node: Node, now: f64) -> usize {
        let key = node.fifo_key();
        let pos = self
            .unassigned
            .iter()
            .rposition(|n| n.fifo_key() <= key)
            .map_or(0, |p| p + 1);
        self.unassigned.insert(pos, node);
        let mut made = 0;
        while self.unassigned.len() >= self.batch_size {
            let nodes: Vec<Node> = self
                .unassigned
                .drain(..self.batch_size)
                .map(|mut n| {
                    n.formed = Some(now);
                    n
                })
                .collect();
            self.formed.push_back(Batch { formed: now, nodes });
            made += 1;
        }
        made
    }

    pub fn can_dispatch(&self) -> bool {
        !self.formed.is_empty() && !self.idle.is_empty()
    }

    /// Hand the oldest full batch to the lowest-id idle deliverer and route it from the hub.
    pub fn dispatch_batch(
        &mut self,
        hub: Point,
        metric: DistanceMetric,
        speed: f64,
        now: f64,
        tour_seed: u64,
    ) -> Result<Dispatch> {
        if !self.can_dispatch() {
            return Err(Error::Internal(format!(
                "zone {} dispatched with {} formed batches and {} idle deliverers",
                self.id,
                self.formed.len(),
                self.idle.len()
            )));
        }
        let deliverer = self.idle.pop_first().expect("checked above");
        let batch = self.formed.pop_front().expect("checked above");
        let points: Vec<Point> = batch.nodes.iter().map(|n| n.point).collect();
        let plan = solve_tour_heuristic(hub, &points, metric, tour_seed)?;
        let visits = plan.arrival_offsets().iter().map(|d| now + d / speed).collect();
        let nodes = plan.order.iter().map(|&i| batch.nodes[i]).collect();
        Ok(Dispatch {
            deliverer,
            start: now,
            end: now + plan.length / speed,
            nodes,
            visits,
            plan,
        })
    }

    pub fn release(&mut self, deliverer: usize) {
        self.idle.insert(deliverer);
    }
}
