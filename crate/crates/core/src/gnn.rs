//! One message-passing layer, run centrally or across partitioned workers.
//!
//! `h_v = act(z_v W_n + x_v W_s + b)` with `z_v = AGG{x_u : u ∈ N(v)}`.
//! The distributed path reconstructs `z_v` on the owner of `v` from local
//! rows plus what the exchange delivered, sending every message through the
//! wire codec on the way.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{
    aggregate_direct, global_aggregate, local_aggregate, AggregationError, Aggregator,
    AggregatorKind, Partial,
};
use crate::graph::{FeatureMatrix, Graph, GraphError, VertexId};
use crate::partition::{neighbor_split, Partition, PartitionError};
use crate::protocol::{
    decode_frame, deliver, encode_frame, exchange_messages, plan, Inbox, Protocol, ProtocolError,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }
}

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("layer shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Weights are row-major `d_in x d_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnLayer {
    d_in: usize,
    d_out: usize,
    neighbor_weight: Vec<f32>,
    self_weight: Vec<f32>,
    bias: Vec<f32>,
    pub activation: Activation,
    pub aggregator: AggregatorKind,
}

impl GnnLayer {
    pub fn new(
        d_in: usize,
        d_out: usize,
        neighbor_weight: Vec<f32>,
        self_weight: Vec<f32>,
        bias: Vec<f32>,
        activation: Activation,
        aggregator: AggregatorKind,
    ) -> Result<Self, GnnError> {
        if d_in == 0 || d_out == 0 {
            return Err(GnnError::Shape("dimensions must be positive".into()));
        }
        for (name, len, want) in [
            ("neighbor weight", neighbor_weight.len(), d_in * d_out),
            ("self weight", self_weight.len(), d_in * d_out),
            ("bias", bias.len(), d_out),
        ] {
            if len != want {
                return Err(GnnError::Shape(format!(
                    "{name} has {len} entries, expected {want}"
                )));
            }
        }
        if neighbor_weight
            .iter()
            .chain(&self_weight)
            .chain(&bias)
            .any(|w| !w.is_finite())
        {
            return Err(GnnError::Shape("weights must be finite".into()));
        }
        Ok(GnnLayer {
            d_in,
            d_out,
            neighbor_weight,
            self_weight,
            bias,
            activation,
            aggregator,
        })
    }

    /// Weights uniform in `[-1/sqrt(d_in), 1/sqrt(d_in)]`, zero bias.
    pub fn random(
        d_in: usize,
        d_out: usize,
        aggregator: AggregatorKind,
        activation: Activation,
        seed: u64,
    ) -> Result<Self, GnnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (d_in.max(1) as f32).sqrt();
        let mut draw = |k: usize| {
            (0..k)
                .map(|_| rng.gen_range(-scale..=scale))
                .collect::<Vec<f32>>()
        };
        let neighbor_weight = draw(d_in * d_out);
        let self_weight = draw(d_in * d_out);
        Self::new(
            d_in,
            d_out,
            neighbor_weight,
            self_weight,
            vec![0.0; d_out],
            activation,
            aggregator,
        )
    }

    /// `h_v = z_v`: identity neighbor weight, zero self weight and bias.
    pub fn aggregate_only(d: usize, aggregator: AggregatorKind) -> Result<Self, GnnError> {
        let mut eye = vec![0.0; d * d];
        (0..d).for_each(|i| eye[i * d + i] = 1.0);
        Self::new(
            d,
            d,
            eye,
            vec![0.0; d * d],
            vec![0.0; d],
            Activation::Identity,
            aggregator,
        )
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    fn aggregator_for(&self) -> Aggregator {
        Aggregator::new(self.aggregator, self.d_in)
    }

    fn check_input(&self, g: &Graph, x: &FeatureMatrix) -> Result<(), GnnError> {
        if x.dim() != self.d_in {
            return Err(GnnError::Shape(format!(
                "features have dim {}, layer expects {}",
                x.dim(),
                self.d_in
            )));
        }
        if x.rows() != g.num_vertices() {
            return Err(GnnError::Shape(format!(
                "{} feature rows for {} vertices",
                x.rows(),
                g.num_vertices()
            )));
        }
        Ok(())
    }

    /// The update applied once `z_v` is known.
    pub fn update(&self, z: &[f32], x: &[f32]) -> Vec<f32> {
        (0..self.d_out)
            .map(|k| {
                let mut acc = f64::from(self.bias[k]);
                for i in 0..self.d_in {
                    acc += f64::from(z[i]) * f64::from(self.neighbor_weight[i * self.d_out + k]);
                    acc += f64::from(x[i]) * f64::from(self.self_weight[i * self.d_out + k]);
                }
                self.activation.apply(acc as f32)
            })
            .collect()
    }
}

fn assemble(rows: Vec<Vec<f32>>, d_out: usize) -> Result<FeatureMatrix, GnnError> {
    let n = rows.len();
    Ok(FeatureMatrix::new(
        n,
        d_out,
        rows.into_iter().flatten().collect(),
    )?)
}

/// Single-machine reference.
pub fn forward_centralized(
    g: &Graph,
    x: &FeatureMatrix,
    layer: &GnnLayer,
) -> Result<FeatureMatrix, GnnError> {
    layer.check_input(g, x)?;
    let agg = layer.aggregator_for();
    let rows = g
        .vertices()
        .map(|v| {
            let z = aggregate_direct(&agg, g.neighbors(v).iter().map(|&u| x.row(u)))?;
            Ok(layer.update(&z, x.row(v)))
        })
        .collect::<Result<Vec<_>, GnnError>>()?;
    assemble(rows, layer.d_out)
}

/// Encodes and decodes every message, as if it crossed the network.
fn over_the_wire(
    workers: usize,
    messages: Vec<crate::protocol::Message>,
    dim: usize,
) -> Result<Vec<Inbox>, GnnError> {
    let decoded = messages
        .iter()
        .map(|m| decode_frame(&encode_frame(m), dim).map_err(ProtocolError::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(deliver(workers, decoded)?)
}

fn missing(v: VertexId, what: &str) -> GnnError {
    GnnError::Protocol(ProtocolError::PlanGraphMismatch(format!(
        "no delivered {what} for vertex {v}"
    )))
}

/// `z_v` on the worker owning `v`.
fn distributed_z(
    g: &Graph,
    p: &Partition,
    x: &FeatureMatrix,
    agg: &Aggregator,
    protocol: Protocol,
    inbox: &Inbox,
    v: VertexId,
) -> Result<Vec<f32>, GnnError> {
    let split = neighbor_split(g, p, v);
    if split.cross.is_empty() {
        // nothing remote: the owner aggregates as a single machine would
        return Ok(aggregate_direct(
            agg,
            split.local.iter().map(|&u| x.row(u)),
        )?);
    }
    match protocol {
        Protocol::Standard { .. } => {
            let rows = g
                .neighbors(v)
                .iter()
                .map(|&u| {
                    if split.local.contains(&u) {
                        Ok(x.row(u))
                    } else {
                        inbox
                            .rows
                            .get(&u)
                            .map(Vec::as_slice)
                            .ok_or_else(|| missing(u, "row"))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(aggregate_direct(agg, rows)?)
        }
        Protocol::Abc => {
            let delivered = inbox
                .partials
                .get(&v)
                .ok_or_else(|| missing(v, "partial"))?;
            if delivered.len() != split.cross.len() {
                return Err(missing(v, "complete set of partials"));
            }
            let local = local_aggregate(agg, split.local.iter().map(|&u| x.row(u)))?;
            let parts: Vec<&Partial> = std::iter::once(&local)
                .chain(delivered.iter().map(|(_, part)| part))
                .collect();
            Ok(global_aggregate(agg, parts)?)
        }
    }
}

/// Simulated multi-worker forward pass; rows come back in global vertex
/// order.
pub fn forward_distributed(
    g: &Graph,
    p: &Partition,
    x: &FeatureMatrix,
    layer: &GnnLayer,
    protocol: Protocol,
) -> Result<FeatureMatrix, GnnError> {
    layer.check_input(g, x)?;
    let agg = layer.aggregator_for();
    let exchange = plan(g, p, protocol)?;
    let inboxes = over_the_wire(p.workers(), exchange_messages(&exchange, x, &agg)?, x.dim())?;
    let mut rows = vec![Vec::new(); g.num_vertices()];
    for (w, inbox) in inboxes.iter().enumerate() {
        for v in p.members(w) {
            let z = distributed_z(g, p, x, &agg, protocol, inbox, v)?;
            rows[v] = layer.update(&z, x.row(v));
        }
    }
    assemble(rows, layer.d_out)
}
