//! Vertex-streaming partitioning: each arriving vertex brings its edges to
//! vertices already seen and is placed irrevocably on a worker.
//!
//! Two placement policies are provided. `Boundary` greedily minimizes the
//! largest boundary set; `Ldg` is the linear deterministic greedy edge-cut
//! heuristic. Replays report communication after every arrival.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexId};
use crate::partition::{boundary_set, Partition, PartitionError, WorkerId};
use crate::protocol::{plan, Protocol, ProtocolError};

/// Slack used when none is configured.
pub const DEFAULT_SLACK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("event {index}: {reason}")]
    MalformedEvent { index: usize, reason: String },
    #[error("no worker below capacity {capacity} at step {step}")]
    NoFeasibleWorker { step: usize, capacity: usize },
    #[error("need at least one worker")]
    NoWorkers,
    #[error("slack must be finite and non-negative, got {0}")]
    InvalidSlack(f64),
    #[error("incremental boundary of worker {worker} diverged at step {step}")]
    IncrementalMismatch { step: usize, worker: WorkerId },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Arrival of `vertex` with its edges to earlier arrivals, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub vertex: VertexId,
    pub edges: Vec<VertexId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrder {
    #[default]
    Natural,
    Random,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Min-max boundary-set size.
    #[default]
    Boundary,
    /// Linear deterministic greedy.
    Ldg,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Boundary => "boundary",
            Policy::Ldg => "ldg",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boundary" => Ok(Policy::Boundary),
            "ldg" => Ok(Policy::Ldg),
            _ => Err(format!("unknown policy {s:?} (expected boundary or ldg)")),
        }
    }
}

/// Original vertex ids in arrival order.
pub fn arrival_order(n: usize, order: StreamOrder, seed: u64) -> Vec<VertexId> {
    let mut ids: Vec<VertexId> = (0..n).collect();
    if order == StreamOrder::Random {
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    ids
}

/// Streams `g` one vertex at a time. Vertices are relabeled by arrival, so
/// event `k` introduces vertex `k`; each edge rides on its later endpoint.
pub fn stream_from_graph(g: &Graph, order: StreamOrder, seed: u64) -> Vec<StreamEvent> {
    let arrival = arrival_order(g.num_vertices(), order, seed);
    let mut position = vec![0; g.num_vertices()];
    for (k, &v) in arrival.iter().enumerate() {
        position[v] = k;
    }
    arrival
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut edges: Vec<VertexId> = g
                .neighbors(v)
                .iter()
                .map(|&u| position[u])
                .filter(|&u| u < k)
                .collect();
            edges.sort_unstable();
            StreamEvent { vertex: k, edges }
        })
        .collect()
}

/// Checks that event `k` introduces vertex `k` with strictly ascending
/// edges to earlier vertices.
pub fn validate_events(events: &[StreamEvent]) -> Result<(), StreamError> {
    for (index, e) in events.iter().enumerate() {
        let bad = |reason: String| Err(StreamError::MalformedEvent { index, reason });
        if e.vertex != index {
            return bad(format!("introduces vertex {}, expected {index}", e.vertex));
        }
        if let Some(&u) = e.edges.iter().find(|&&u| u >= index) {
            return bad(format!("edge to vertex {u}, which has not arrived"));
        }
        if e.edges.windows(2).any(|w| w[0] >= w[1]) {
            return bad("edges not strictly ascending".into());
        }
    }
    Ok(())
}

/// Per-worker capacity `max(ceil(n/m), floor(ceil(n/m) * (1 + slack)))`.
pub fn stream_capacity(n: usize, workers: usize, slack: f64) -> Result<usize, StreamError> {
    if workers == 0 {
        return Err(StreamError::NoWorkers);
    }
    if !slack.is_finite() || slack < 0.0 {
        return Err(StreamError::InvalidSlack(slack));
    }
    let base = n.div_ceil(workers);
    // the epsilon keeps exact products such as 10 * 1.1 from rounding down
    Ok(base.max((base as f64 * (1.0 + slack) + 1e-9).floor() as usize))
}

/// Partial graph and partition, with boundary sets kept up to date per
/// arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    workers: usize,
    capacity: usize,
    edges: Vec<(VertexId, VertexId)>,
    owner: Vec<WorkerId>,
    sizes: Vec<usize>,
    /// Neighbors of each vertex that live on another worker.
    cross_degree: Vec<usize>,
    boundary_sizes: Vec<usize>,
    cross_edges: usize,
}

impl StreamState {
    pub fn new(workers: usize, capacity: usize) -> Result<Self, StreamError> {
        if workers == 0 {
            return Err(StreamError::NoWorkers);
        }
        Ok(StreamState {
            workers,
            capacity,
            edges: Vec::new(),
            owner: Vec::new(),
            sizes: vec![0; workers],
            cross_degree: Vec::new(),
            boundary_sizes: vec![0; workers],
            cross_edges: 0,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn vertices(&self) -> usize {
        self.owner.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn boundary_sizes(&self) -> &[usize] {
        &self.boundary_sizes
    }

    pub fn max_boundary(&self) -> usize {
        self.boundary_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn cross_edges(&self) -> usize {
        self.cross_edges
    }

    /// Incrementally tracked boundary set of `w`, ascending.
    pub fn boundary_set(&self, w: WorkerId) -> Vec<VertexId> {
        (0..self.vertices())
            .filter(|&v| self.owner[v] == w && self.cross_degree[v] > 0)
            .collect()
    }

    fn check_next(&self, e: &StreamEvent) -> Result<(), StreamError> {
        let index = self.vertices();
        if e.vertex != index
            || e.edges.iter().any(|&u| u >= index)
            || e.edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(StreamError::MalformedEvent {
                index,
                reason: format!("event for vertex {} does not extend the stream", e.vertex),
            });
        }
        Ok(())
    }

    fn feasible(&self) -> impl Iterator<Item = WorkerId> + '_ {
        (0..self.workers).filter(|&w| self.sizes[w] < self.capacity)
    }

    /// Boundary sizes if the arriving vertex were placed on `w`.
    fn boundary_after(&self, e: &StreamEvent, w: WorkerId) -> Vec<usize> {
        let mut sizes = self.boundary_sizes.clone();
        let mut crosses = false;
        for &u in &e.edges {
            if self.owner[u] != w {
                crosses = true;
                if self.cross_degree[u] == 0 {
                    sizes[self.owner[u]] += 1;
                }
            }
        }
        if crosses {
            sizes[w] += 1;
        }
        sizes
    }

    fn no_room(&self) -> StreamError {
        StreamError::NoFeasibleWorker {
            step: self.vertices(),
            capacity: self.capacity,
        }
    }

    /// Places the arriving vertex on `w`.
    pub fn place(&mut self, e: &StreamEvent, w: WorkerId) -> Result<(), StreamError> {
        self.check_next(e)?;
        if w >= self.workers || self.sizes[w] >= self.capacity {
            return Err(self.no_room());
        }
        let v = e.vertex;
        self.owner.push(w);
        self.cross_degree.push(0);
        self.sizes[w] += 1;
        for &u in &e.edges {
            self.edges.push((u, v));
            let x = self.owner[u];
            if x != w {
                self.cross_edges += 1;
                if self.cross_degree[u] == 0 {
                    self.boundary_sizes[x] += 1;
                }
                self.cross_degree[u] += 1;
                self.cross_degree[v] += 1;
            }
        }
        if self.cross_degree[v] > 0 {
            self.boundary_sizes[w] += 1;
        }
        Ok(())
    }

    /// The graph seen so far.
    pub fn graph(&self) -> Graph {
        Graph::from_edges(self.vertices(), &self.edges).expect("stream events carry each edge once")
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.owner.clone(), self.workers).expect("owners are in range")
    }
}

/// Feasible worker minimizing the largest boundary set after placement,
/// then the total boundary size, then current size, then id.
pub fn assign_boundary_greedy(s: &StreamState, e: &StreamEvent) -> Result<WorkerId, StreamError> {
    s.check_next(e)?;
    s.feasible()
        .min_by_key(|&w| {
            let after = s.boundary_after(e, w);
            (
                after.iter().copied().max().unwrap_or(0),
                after.iter().sum::<usize>(),
                s.sizes[w],
                w,
            )
        })
        .ok_or_else(|| s.no_room())
}

/// Feasible worker maximizing `|N(v) on w| * (1 - size(w) / capacity)`, then
/// smaller current size, then lower id.
pub fn assign_ldg(s: &StreamState, e: &StreamEvent) -> Result<WorkerId, StreamError> {
    s.check_next(e)?;
    let mut neighbors = vec![0usize; s.workers];
    for &u in &e.edges {
        neighbors[s.owner[u]] += 1;
    }
    // scaled by capacity to stay in integers
    s.feasible()
        .min_by_key(|&w| {
            (
                std::cmp::Reverse(neighbors[w] * (s.capacity - s.sizes[w])),
                s.sizes[w],
                w,
            )
        })
        .ok_or_else(|| s.no_room())
}

pub fn assign(policy: Policy, s: &StreamState, e: &StreamEvent) -> Result<WorkerId, StreamError> {
    match policy {
        Policy::Boundary => assign_boundary_greedy(s, e),
        Policy::Ldg => assign_ldg(s, e),
    }
}

/// Communication state after one arrival.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamStep {
    pub step: usize,
    pub worker: WorkerId,
    pub max_boundary: usize,
    pub cross_edges: usize,
    pub total_units: usize,
    pub boundary_sizes: Vec<usize>,
    pub received_units: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub policy: Policy,
    pub protocol: Protocol,
    pub steps: Vec<StreamStep>,
    pub state: StreamState,
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    step: usize,
    policy: &'a str,
    protocol: &'a str,
    max_boundary: usize,
    cross_edges: usize,
    total_units: usize,
}

impl Replay {
    /// `step,policy,protocol,max_boundary,cross_edges,total_units`.
    pub fn series_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.steps {
            w.serialize(SeriesRow {
                step: s.step,
                policy: self.policy.name(),
                protocol: self.protocol.name(),
                max_boundary: s.max_boundary,
                cross_edges: s.cross_edges,
                total_units: s.total_units,
            })
            .expect("flat record");
        }
        if self.steps.is_empty() {
            w.write_record([
                "step",
                "policy",
                "protocol",
                "max_boundary",
                "cross_edges",
                "total_units",
            ])
            .expect("header");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
    }
}

/// Replays `events`, recomputing communication from scratch after every
/// arrival. With `verify_incremental`, the tracked boundary sets are compared
/// against a from-scratch computation at every step.
pub fn replay(
    events: &[StreamEvent],
    policy: Policy,
    workers: usize,
    slack: f64,
    protocol: Protocol,
    verify_incremental: bool,
) -> Result<Replay, StreamError> {
    validate_events(events)?;
    let capacity = stream_capacity(events.len(), workers, slack)?;
    let mut state = StreamState::new(workers, capacity)?;
    let mut steps = Vec::with_capacity(events.len());
    for (step, e) in events.iter().enumerate() {
        let w = assign(policy, &state, e)?;
        state.place(e, w)?;
        let (g, p) = (state.graph(), state.partition());
        if verify_incremental {
            if let Some(worker) =
                (0..workers).find(|&x| state.boundary_set(x) != boundary_set(&g, &p, x))
            {
                return Err(StreamError::IncrementalMismatch { step, worker });
            }
        }
        let exchange = plan(&g, &p, protocol)?;
        steps.push(StreamStep {
            step,
            worker: w,
            max_boundary: state.max_boundary(),
            cross_edges: state.cross_edges(),
            total_units: exchange.total_units(),
            boundary_sizes: state.boundary_sizes().to_vec(),
            received_units: (0..workers).map(|i| exchange.received_units(i)).collect(),
        });
    }
    Ok(Replay {
        policy,
        protocol,
        steps,
        state,
    })
}
