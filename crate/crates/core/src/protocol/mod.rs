//! Exchange plans for the standard feature-fetch protocol and for
//! aggregation before communication (ABC), their execution as wire
//! messages, and message/byte accounting.
//!
//! Under the standard protocol a worker fetches the raw feature row of every
//! cross neighbor of its boundary vertices. Under ABC it sends the serving
//! worker the ids of its boundary vertices, and the server answers with one
//! partial aggregate per requested vertex over that vertex's neighbors it
//! holds.

mod exchange;
mod wire;

pub use exchange::{
    count_report, deliver, exchange_messages, execute, CommReport, Inbox, PairCount,
};
pub use wire::{
    decode_frame, encode_frame, frame_len, MalformedFrame, Message, MessageType, FRAME_HEADER_LEN,
    WIRE_VERSION,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::graph::{Graph, VertexId};
use crate::partition::{neighbor_split, Partition, PartitionError, WorkerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    /// Raw features. `dedup` ships each source row once per worker pair;
    /// otherwise once per (boundary vertex, cross neighbor) incidence.
    Standard {
        dedup: bool,
    },
    Abc,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Standard { dedup: false } => "standard",
            Protocol::Standard { dedup: true } => "standard_dedup",
            Protocol::Abc => "abc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("plan does not match its inputs: {0}")]
    PlanGraphMismatch(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error("{what} {value} does not fit the wire field")]
    WireOverflow { what: &'static str, value: usize },
    #[error(transparent)]
    Malformed(#[from] MalformedFrame),
}

/// What one receiving worker asks of one serving worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPlan {
    pub receiver: WorkerId,
    pub sender: WorkerId,
    /// Standard: source vertices whose rows the sender returns, ascending,
    /// repeated once per incidence without dedup. ABC: the receiver's
    /// boundary vertices with at least one neighbor on the sender, ascending.
    pub requests: Vec<VertexId>,
    /// ABC only, aligned with `requests`: the sender's neighbors of each
    /// requested vertex, ascending.
    pub sources: Vec<Vec<VertexId>>,
}

impl PairPlan {
    /// Payload units: feature rows (standard) or partials (ABC).
    pub fn units(&self) -> usize {
        self.requests.len()
    }
}

/// Per-ordered-pair messages for one protocol on one `(graph, partition)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangePlan {
    pub protocol: Protocol,
    pub workers: usize,
    pub vertices: usize,
    /// Pairs with at least one request, ordered by `(receiver, sender)`.
    pub pairs: Vec<PairPlan>,
}

impl ExchangePlan {
    pub fn pair(&self, receiver: WorkerId, sender: WorkerId) -> Option<&PairPlan> {
        self.pairs
            .iter()
            .find(|p| p.receiver == receiver && p.sender == sender)
    }

    pub fn units(&self, receiver: WorkerId, sender: WorkerId) -> usize {
        self.pair(receiver, sender).map_or(0, PairPlan::units)
    }

    pub fn total_units(&self) -> usize {
        self.pairs.iter().map(PairPlan::units).sum()
    }

    pub fn received_units(&self, receiver: WorkerId) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.receiver == receiver)
            .map(PairPlan::units)
            .sum()
    }
}

/// Cross neighbors of one vertex, keyed by their worker.
type CrossNeighbors = BTreeMap<WorkerId, Vec<VertexId>>;

/// Every boundary vertex, ascending, with its cross neighbors by worker.
fn cross_incidences(
    g: &Graph,
    p: &Partition,
) -> Result<Vec<(VertexId, CrossNeighbors)>, ProtocolError> {
    p.check_graph(g)?;
    Ok(g.vertices()
        .map(|v| (v, neighbor_split(g, p, v).cross))
        .filter(|(_, cross)| !cross.is_empty())
        .collect())
}

fn finish(
    protocol: Protocol,
    g: &Graph,
    p: &Partition,
    pairs: BTreeMap<(WorkerId, WorkerId), PairPlan>,
) -> ExchangePlan {
    ExchangePlan {
        protocol,
        workers: p.workers(),
        vertices: g.num_vertices(),
        pairs: pairs.into_values().collect(),
    }
}

fn empty_pair(receiver: WorkerId, sender: WorkerId) -> PairPlan {
    PairPlan {
        receiver,
        sender,
        requests: Vec::new(),
        sources: Vec::new(),
    }
}

/// Standard protocol: worker `i` needs `x_u` for every `u ∈ N(v)^c` on `j`,
/// over its boundary vertices `v`.
pub fn plan_standard(g: &Graph, p: &Partition, dedup: bool) -> Result<ExchangePlan, ProtocolError> {
    let mut pairs: BTreeMap<(WorkerId, WorkerId), PairPlan> = BTreeMap::new();
    let mut seen: BTreeMap<(WorkerId, WorkerId), BTreeSet<VertexId>> = BTreeMap::new();
    for (v, cross) in cross_incidences(g, p)? {
        let i = p.worker_of(v);
        for (j, us) in cross {
            let pair = pairs.entry((i, j)).or_insert_with(|| empty_pair(i, j));
            if dedup {
                seen.entry((i, j)).or_default().extend(us);
            } else {
                pair.requests.extend(us);
            }
        }
    }
    if dedup {
        for (key, set) in seen {
            pairs
                .get_mut(&key)
                .expect("pair created with its set")
                .requests = set.into_iter().collect();
        }
    } else {
        for pair in pairs.values_mut() {
            pair.requests.sort_unstable();
        }
    }
    Ok(finish(Protocol::Standard { dedup }, g, p, pairs))
}

/// ABC: one request (and one partial back) per boundary vertex of `i` and
/// serving worker `j` holding at least one of its neighbors.
pub fn plan_abc(g: &Graph, p: &Partition) -> Result<ExchangePlan, ProtocolError> {
    let mut pairs: BTreeMap<(WorkerId, WorkerId), PairPlan> = BTreeMap::new();
    for (v, cross) in cross_incidences(g, p)? {
        let i = p.worker_of(v);
        for (j, us) in cross {
            let pair = pairs.entry((i, j)).or_insert_with(|| empty_pair(i, j));
            pair.requests.push(v);
            pair.sources.push(us);
        }
    }
    Ok(finish(Protocol::Abc, g, p, pairs))
}

pub fn plan(g: &Graph, p: &Partition, protocol: Protocol) -> Result<ExchangePlan, ProtocolError> {
    match protocol {
        Protocol::Standard { dedup } => plan_standard(g, p, dedup),
        Protocol::Abc => plan_abc(g, p),
    }
}
