//! Communication-complexity toolkit for distributed one-layer GNN inference.
//!
//! The crate compares two ways of feeding a GNN aggregation across workers:
//! the standard protocol, which ships raw neighbor features, and
//! aggregation-before-communication (ABC), where the serving worker
//! pre-aggregates each requested vertex's neighbors and ships one partial.
//! Around that sit graph partitioners (edge-cut and vertex-cut), exhaustive
//! cut oracles, a streaming partitioner, and a harness that checks the
//! communication bounds on generated instances.

pub mod aggregation;
pub mod gnn;
pub mod graph;
pub mod partition;
pub mod protocol;
pub mod stream;
pub mod verify;
