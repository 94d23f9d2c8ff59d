//! Executing a plan as messages, delivering them into per-worker inboxes,
//! and counting what crosses the network.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::wire::{frame_len, Message, MessageType};
use super::{ExchangePlan, Protocol, ProtocolError};
use crate::aggregation::{local_aggregate, Aggregator, AggregatorKind, Partial};
use crate::graph::{FeatureMatrix, VertexId};
use crate::partition::WorkerId;

/// What one worker holds after the exchange.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inbox {
    /// Standard: raw rows of remote neighbors.
    pub rows: BTreeMap<VertexId, Vec<f32>>,
    /// ABC: partials for own boundary vertices, ascending by sender.
    pub partials: BTreeMap<VertexId, Vec<(WorkerId, Partial)>>,
}

fn wire_worker(w: WorkerId) -> Result<u16, ProtocolError> {
    u16::try_from(w).map_err(|_| ProtocolError::WireOverflow {
        what: "worker id",
        value: w,
    })
}

fn wire_vertex(v: VertexId) -> Result<u32, ProtocolError> {
    u32::try_from(v).map_err(|_| ProtocolError::WireOverflow {
        what: "vertex id",
        value: v,
    })
}

fn check_inputs(
    plan: &ExchangePlan,
    feats: &FeatureMatrix,
    agg: &Aggregator,
) -> Result<(), ProtocolError> {
    if feats.rows() != plan.vertices {
        return Err(ProtocolError::PlanGraphMismatch(format!(
            "plan covers {} vertices, feature matrix has {} rows",
            plan.vertices,
            feats.rows()
        )));
    }
    if feats.dim() != agg.dim {
        return Err(ProtocolError::PlanGraphMismatch(format!(
            "aggregator dim {} differs from feature dim {}",
            agg.dim,
            feats.dim()
        )));
    }
    let out_of_range = plan
        .pairs
        .iter()
        .flat_map(|p| p.requests.iter().chain(p.sources.iter().flatten()))
        .find(|&&v| v >= plan.vertices);
    if let Some(v) = out_of_range {
        return Err(ProtocolError::PlanGraphMismatch(format!(
            "plan references vertex {v} of {}",
            plan.vertices
        )));
    }
    Ok(())
}

/// Every message of the exchange: per pair, the receiver's request to the
/// serving worker followed by the server's response.
pub fn exchange_messages(
    plan: &ExchangePlan,
    feats: &FeatureMatrix,
    agg: &Aggregator,
) -> Result<Vec<Message>, ProtocolError> {
    check_inputs(plan, feats, agg)?;
    let mut out = Vec::with_capacity(2 * plan.pairs.len());
    for pair in &plan.pairs {
        let (asker, server) = (wire_worker(pair.receiver)?, wire_worker(pair.sender)?);
        let ids = pair
            .requests
            .iter()
            .map(|&v| wire_vertex(v))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Message::Request {
            sender: asker,
            receiver: server,
            ids: ids.clone(),
        });
        let response = match plan.protocol {
            Protocol::Standard { .. } => Message::StandardResponse {
                sender: server,
                receiver: asker,
                entries: ids
                    .iter()
                    .zip(&pair.requests)
                    .map(|(&id, &u)| (id, feats.row(u).to_vec()))
                    .collect(),
            },
            Protocol::Abc => {
                if pair.sources.len() != pair.requests.len() {
                    return Err(ProtocolError::PlanGraphMismatch(format!(
                        "pair {}<-{} has {} requests but {} source lists",
                        pair.receiver,
                        pair.sender,
                        pair.requests.len(),
                        pair.sources.len()
                    )));
                }
                let entries = ids
                    .iter()
                    .zip(&pair.sources)
                    .map(|(&id, srcs)| {
                        Ok((
                            id,
                            local_aggregate(agg, srcs.iter().map(|&u| feats.row(u)))?,
                        ))
                    })
                    .collect::<Result<Vec<_>, ProtocolError>>()?;
                Message::AbcResponse {
                    sender: server,
                    receiver: asker,
                    kind: agg.kind,
                    entries,
                }
            }
        };
        out.push(response);
    }
    Ok(out)
}

/// Files responses into their receivers' inboxes. Requests carry no
/// payload and are skipped. The result does not depend on message order.
pub fn deliver(
    workers: usize,
    messages: impl IntoIterator<Item = Message>,
) -> Result<Vec<Inbox>, ProtocolError> {
    let mut inboxes = vec![Inbox::default(); workers];
    for msg in messages {
        let receiver = usize::from(msg.receiver());
        if receiver >= workers {
            return Err(ProtocolError::PlanGraphMismatch(format!(
                "message for worker {receiver} of {workers}"
            )));
        }
        let inbox = &mut inboxes[receiver];
        match msg {
            Message::Request { .. } => {}
            Message::StandardResponse { entries, .. } => {
                for (id, row) in entries {
                    inbox.rows.insert(id as VertexId, row);
                }
            }
            Message::AbcResponse {
                sender, entries, ..
            } => {
                for (id, partial) in entries {
                    inbox
                        .partials
                        .entry(id as VertexId)
                        .or_default()
                        .push((usize::from(sender), partial));
                }
            }
        }
    }
    for inbox in &mut inboxes {
        for parts in inbox.partials.values_mut() {
            parts.sort_by_key(|(sender, _)| *sender);
        }
    }
    Ok(inboxes)
}

/// Runs the exchange in memory.
pub fn execute(
    plan: &ExchangePlan,
    feats: &FeatureMatrix,
    agg: &Aggregator,
) -> Result<Vec<Inbox>, ProtocolError> {
    deliver(plan.workers, exchange_messages(plan, feats, agg)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub receiver: WorkerId,
    pub sender: WorkerId,
    /// Feature rows or partials carried by the response.
    pub units: usize,
    pub request_bytes: usize,
    pub response_bytes: usize,
}

impl PairCount {
    pub fn bytes(&self) -> usize {
        self.request_bytes + self.response_bytes
    }
}

/// Message and byte accounting for one plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommReport {
    pub protocol: Protocol,
    pub aggregator: AggregatorKind,
    pub dim: usize,
    pub workers: usize,
    /// Every ordered pair `receiver != sender`, zero rows included.
    pub pairs: Vec<PairCount>,
    pub total_units: usize,
    pub total_bytes: usize,
    pub received_units: Vec<usize>,
    pub received_bytes: Vec<usize>,
}

impl CommReport {
    pub fn pair(&self, receiver: WorkerId, sender: WorkerId) -> Option<&PairCount> {
        self.pairs
            .iter()
            .find(|p| p.receiver == receiver && p.sender == sender)
    }

    pub fn max_received_units(&self) -> usize {
        self.received_units.iter().copied().max().unwrap_or(0)
    }
}

/// Counts units and encoded frame bytes without running the exchange.
/// Request frames count toward bytes only.
pub fn count_report(plan: &ExchangePlan, agg: &Aggregator) -> CommReport {
    let (response_type, kind) = match plan.protocol {
        Protocol::Standard { .. } => (MessageType::StandardResponse, None),
        Protocol::Abc => (MessageType::AbcResponse, Some(agg.kind)),
    };
    let mut pairs = Vec::new();
    for receiver in 0..plan.workers {
        for sender in (0..plan.workers).filter(|&j| j != receiver) {
            let units = plan.units(receiver, sender);
            let (request_bytes, response_bytes) = if units == 0 {
                (0, 0)
            } else {
                (
                    frame_len(MessageType::Request, units, agg.dim, None),
                    frame_len(response_type, units, agg.dim, kind),
                )
            };
            pairs.push(PairCount {
                receiver,
                sender,
                units,
                request_bytes,
                response_bytes,
            });
        }
    }
    let mut received_units = vec![0; plan.workers];
    let mut received_bytes = vec![0; plan.workers];
    for p in &pairs {
        received_units[p.receiver] += p.units;
        received_bytes[p.receiver] += p.bytes();
    }
    CommReport {
        protocol: plan.protocol,
        aggregator: agg.kind,
        dim: agg.dim,
        workers: plan.workers,
        total_units: pairs.iter().map(|p| p.units).sum(),
        total_bytes: pairs.iter().map(PairCount::bytes).sum(),
        pairs,
        received_units,
        received_bytes,
    }
}
