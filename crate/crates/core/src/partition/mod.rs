//! Worker assignments and the boundary structure they induce, plus the
//! edge-cut and vertex-cut partitioners and exhaustive cut oracles.

mod brute;
mod flow;
mod greedy;
mod vertex_cut;

pub use brute::{
    brute_force_edge_cut, brute_force_min_edge_cut, brute_force_vertex_cut, BRUTE_FORCE_MAX_N,
};
pub use flow::{flow_vertex_connectivity, VertexConnectivity};
pub use greedy::greedy_edge_cut;
pub use vertex_cut::{vertex_cut_partition, Completion};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, VertexId};

/// Worker identifier; dense in `0..m`.
pub type WorkerId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("vertex {vertex} assigned to worker {worker}, but only {workers} workers exist")]
    WorkerOutOfRange {
        vertex: VertexId,
        worker: WorkerId,
        workers: usize,
    },
    #[error("partition covers {assigned} vertices, graph has {n}")]
    SizeMismatch { assigned: usize, n: usize },
    #[error("cannot balance {n} vertices over {workers} workers")]
    InfeasibleBalance { n: usize, workers: usize },
    #[error("graph has {n} vertices, exhaustive search is capped at {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("graph needs at least {0} vertices for this search")]
    TooSmall(usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("complete graph has no vertex cut")]
    NoVertexCut,
    #[error("vertex set {0:?} does not disconnect the graph")]
    NotAVertexCut(Vec<VertexId>),
}

/// Total assignment of vertices to `m` workers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<WorkerId>,
    workers: usize,
}

impl Partition {
    pub fn new(assignment: Vec<WorkerId>, workers: usize) -> Result<Self, PartitionError> {
        if workers == 0 {
            return Err(PartitionError::NoWorkers);
        }
        if let Some((vertex, &worker)) = assignment.iter().enumerate().find(|(_, &w)| w >= workers)
        {
            return Err(PartitionError::WorkerOutOfRange {
                vertex,
                worker,
                workers,
            });
        }
        Ok(Partition {
            assignment,
            workers,
        })
    }

    /// Each vertex on a uniformly drawn worker.
    pub fn random(n: usize, workers: usize, seed: u64) -> Result<Self, PartitionError> {
        if workers == 0 {
            return Err(PartitionError::NoWorkers);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Partition {
            assignment: (0..n).map(|_| rng.gen_range(0..workers)).collect(),
            workers,
        })
    }

    /// Every vertex of an `n`-vertex graph on worker 0.
    pub fn single(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            workers: 1,
        }
    }

    pub fn check_graph(&self, g: &Graph) -> Result<(), PartitionError> {
        if self.assignment.len() != g.num_vertices() {
            return Err(PartitionError::SizeMismatch {
                assigned: self.assignment.len(),
                n: g.num_vertices(),
            });
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn worker_of(&self, v: VertexId) -> WorkerId {
        self.assignment[v]
    }

    pub fn assignment(&self) -> &[WorkerId] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.workers];
        for &w in &self.assignment {
            sizes[w] += 1;
        }
        sizes
    }

    /// Vertices on worker `w`, ascending.
    pub fn members(&self, w: WorkerId) -> Vec<VertexId> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == w)
            .map(|(v, _)| v)
            .collect()
    }
}

/// JSON form `{m, assignment}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDocument {
    pub m: usize,
    pub assignment: Vec<WorkerId>,
}

impl From<&Partition> for PartitionDocument {
    fn from(p: &Partition) -> Self {
        PartitionDocument {
            m: p.workers,
            assignment: p.assignment.clone(),
        }
    }
}

impl TryFrom<PartitionDocument> for Partition {
    type Error = PartitionError;

    fn try_from(doc: PartitionDocument) -> Result<Self, Self::Error> {
        Partition::new(doc.assignment, doc.m)
    }
}

/// Neighbors of one vertex split by where they live.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborSplit {
    /// Neighbors on the vertex's own worker, ascending.
    pub local: Vec<VertexId>,
    /// Neighbors on each other worker that holds at least one, ascending.
    pub cross: BTreeMap<WorkerId, Vec<VertexId>>,
}

impl NeighborSplit {
    pub fn cross_len(&self) -> usize {
        self.cross.values().map(Vec::len).sum()
    }
}

pub fn neighbor_split(g: &Graph, p: &Partition, v: VertexId) -> NeighborSplit {
    let home = p.worker_of(v);
    let mut split = NeighborSplit::default();
    for &u in g.neighbors(v) {
        let w = p.worker_of(u);
        if w == home {
            split.local.push(u);
        } else {
            split.cross.entry(w).or_default().push(u);
        }
    }
    split
}

pub fn is_boundary(g: &Graph, p: &Partition, v: VertexId) -> bool {
    let home = p.worker_of(v);
    g.neighbors(v).iter().any(|&u| p.worker_of(u) != home)
}

/// Vertices on worker `w` with at least one neighbor elsewhere, ascending.
pub fn boundary_set(g: &Graph, p: &Partition, w: WorkerId) -> Vec<VertexId> {
    g.vertices()
        .filter(|&v| p.worker_of(v) == w && is_boundary(g, p, v))
        .collect()
}

/// `boundary_set` for every worker at once.
pub fn boundary_sets(g: &Graph, p: &Partition) -> Vec<Vec<VertexId>> {
    let mut sets = vec![Vec::new(); p.workers()];
    for v in g.vertices() {
        if is_boundary(g, p, v) {
            sets[p.worker_of(v)].push(v);
        }
    }
    sets
}

/// Edges with one endpoint on `i` and the other on `j`. Zero when `i == j`.
pub fn cross_edge_count(g: &Graph, p: &Partition, i: WorkerId, j: WorkerId) -> usize {
    if i == j {
        return 0;
    }
    g.edges()
        .filter(|&(u, v)| {
            let (a, b) = (p.worker_of(u), p.worker_of(v));
            (a == i && b == j) || (a == j && b == i)
        })
        .count()
}

/// Edges whose endpoints sit on different workers.
pub fn total_cross_edges(g: &Graph, p: &Partition) -> usize {
    g.edges()
        .filter(|&(u, v)| p.worker_of(u) != p.worker_of(v))
        .count()
}

/// Witness of an optimal cut found by an oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutCertificate {
    /// Cut edges, each `(u, v)` with `u < v`, ascending.
    Edge { edges: Vec<(VertexId, VertexId)> },
    /// Cut vertices, ascending.
    Vertex { vertices: Vec<VertexId> },
}

impl CutCertificate {
    pub fn size(&self) -> usize {
        match self {
            CutCertificate::Edge { edges } => edges.len(),
            CutCertificate::Vertex { vertices } => vertices.len(),
        }
    }

    /// Re-checks the certificate against `g`. Vertex cuts must leave at least
    /// two components; edge cuts must disconnect the graph once removed.
    pub fn verify(&self, g: &Graph) -> bool {
        match self {
            CutCertificate::Vertex { vertices } => {
                crate::graph::components_excluding(g, vertices).count >= 2
            }
            CutCertificate::Edge { edges } => {
                let kept: Vec<_> = g.edges().filter(|e| !edges.contains(e)).collect();
                let rest =
                    Graph::from_edges(g.num_vertices(), &kept).expect("subgraph of a valid graph");
                !rest.is_connected()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_family, GraphFamily};

    fn path3() -> Graph {
        gen_family(GraphFamily::Path { n: 3 }).unwrap()
    }

    fn star5_split() -> (Graph, Partition) {
        let g = gen_family(GraphFamily::Star { n: 5 }).unwrap();
        (g, Partition::new(vec![0, 0, 1, 1, 1], 2).unwrap())
    }

    #[test]
    fn partition_validation() {
        assert_eq!(Partition::new(vec![0], 0), Err(PartitionError::NoWorkers));
        assert_eq!(
            Partition::new(vec![0, 2], 2),
            Err(PartitionError::WorkerOutOfRange {
                vertex: 1,
                worker: 2,
                workers: 2
            })
        );
        let p = Partition::new(vec![1, 0, 1], 2).unwrap();
        assert_eq!(p.sizes(), vec![1, 2]);
        assert_eq!(p.members(1), vec![0, 2]);
        assert!(p.check_graph(&Graph::empty(2)).is_err());
    }

    #[test]
    fn split_on_path() {
        let g = path3();
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        let s = neighbor_split(&g, &p, 1);
        assert_eq!(s.local, vec![0]);
        assert_eq!(s.cross, BTreeMap::from([(1, vec![2])]));
        let s0 = neighbor_split(&g, &p, 0);
        assert_eq!(s0.local, vec![1]);
        assert!(s0.cross.is_empty());
        let single = Partition::single(3);
        assert!(g
            .vertices()
            .all(|v| neighbor_split(&g, &single, v).cross.is_empty()));
    }

    #[test]
    fn boundary_on_path_and_single_worker() {
        let g = path3();
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        assert_eq!(boundary_set(&g, &p, 0), vec![1]);
        assert_eq!(boundary_set(&g, &p, 1), vec![2]);
        assert!(boundary_set(&g, &Partition::single(3), 0).is_empty());
        assert_eq!(cross_edge_count(&g, &p, 0, 1), 1);
        assert_eq!(cross_edge_count(&g, &Partition::single(3), 0, 0), 0);
    }

    #[test]
    fn star_split_boundary_and_cross_edges() {
        let (g, p) = star5_split();
        // Edges 0-2, 0-3, 0-4 cross; 0-1 stays local.
        assert_eq!(boundary_set(&g, &p, 0), vec![0]);
        assert_eq!(boundary_set(&g, &p, 1), vec![2, 3, 4]);
        assert_eq!(cross_edge_count(&g, &p, 0, 1), 3);
        assert_eq!(cross_edge_count(&g, &p, 1, 0), 3);
        assert_eq!(total_cross_edges(&g, &p), 3);
    }

    #[test]
    fn partition_document_round_trip() {
        let p = Partition::new(vec![0, 1, 1, 0], 2).unwrap();
        let doc = PartitionDocument::from(&p);
        let json = serde_json::to_string(&doc).unwrap();
        assert_eq!(json, r#"{"m":2,"assignment":[0,1,1,0]}"#);
        let back: PartitionDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(Partition::try_from(back).unwrap(), p);
    }

    #[test]
    fn certificates_verify() {
        let g = path3();
        assert!(CutCertificate::Vertex { vertices: vec![1] }.verify(&g));
        assert!(!CutCertificate::Vertex { vertices: vec![0] }.verify(&g));
        assert!(CutCertificate::Edge {
            edges: vec![(0, 1)]
        }
        .verify(&g));
    }
}
