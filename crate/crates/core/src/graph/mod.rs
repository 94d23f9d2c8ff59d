//! Undirected simple graphs in compressed adjacency form, dense vertex
//! features, deterministic generators and text/JSON interchange.

mod generate;
mod io;

pub use generate::{attach_random_features, gen_er_connected, gen_family, GraphFamily};
pub use io::{parse_edge_list, to_edge_list, GraphDocument};

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

/// Vertex identifier; dense in `0..n`.
pub type VertexId = usize;

/// Errors raised while building, parsing or generating graphs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("header declares {declared} edges but {found} were given")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error("feature matrix has {rows} rows of dim {dim}, expected {expected_rows} rows")]
    FeatureShape {
        rows: usize,
        dim: usize,
        expected_rows: usize,
    },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("feature dimension must be at least 1")]
    ZeroDim,
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("no connected sample after {attempts} attempts (p too small for n?)")]
    GenerationFailed { attempts: usize },
    #[error("json: {0}")]
    Json(String),
}

/// Immutable undirected simple graph stored as CSR.
///
/// Neighbor lists are sorted ascending, symmetric, free of self-loops and
/// duplicates. Every constructor enforces this.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Edge orientation is
    /// irrelevant, but each unordered pair may appear only once.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self, GraphError> {
        let mut lists: Vec<Vec<VertexId>> = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: x, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        Ok(Self::from_sorted_lists(lists))
    }

    /// Same as [`Graph::from_edges`] but silently drops repeated pairs.
    /// Self-loops and out-of-range ids are still rejected.
    pub fn from_edges_dedup(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self, GraphError> {
        let set: BTreeSet<(VertexId, VertexId)> =
            edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        let unique: Vec<_> = set.into_iter().collect();
        Self::from_edges(n, &unique)
    }

    fn from_sorted_lists(mut lists: Vec<Vec<VertexId>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for list in &mut lists {
            list.sort_unstable();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Graph { offsets, targets }
    }

    pub fn empty(n: usize) -> Self {
        Graph {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn vertices(&self) -> std::ops::Range<VertexId> {
        0..self.num_vertices()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.vertices().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    pub fn is_complete(&self) -> bool {
        let n = self.num_vertices();
        self.num_edges() == n * n.saturating_sub(1) / 2
    }

    pub fn is_connected(&self) -> bool {
        self.num_vertices() <= 1 || components_excluding(self, &[]).count == 1
    }

    /// Full scan of the CSR invariants. Used by tests and after parsing.
    pub fn check_invariants(&self) -> bool {
        self.vertices().all(|v| {
            let ns = self.neighbors(v);
            ns.windows(2).all(|w| w[0] < w[1])
                && ns
                    .iter()
                    .all(|&u| u != v && u < self.num_vertices() && self.has_edge(u, v))
        })
    }
}

/// Result of [`components_excluding`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub count: usize,
    /// Component label per vertex; excluded vertices carry [`Components::EXCLUDED`].
    pub labels: Vec<usize>,
}

impl Components {
    pub const EXCLUDED: usize = usize::MAX;

    /// Vertex lists per component, each sorted ascending, in label order.
    pub fn groups(&self) -> Vec<Vec<VertexId>> {
        let mut groups = vec![Vec::new(); self.count];
        for (v, &label) in self.labels.iter().enumerate() {
            if label != Self::EXCLUDED {
                groups[label].push(v);
            }
        }
        groups
    }
}

/// Connected components of `g` with the `excluded` vertices removed.
/// Labels are assigned in order of each component's smallest vertex.
pub fn components_excluding(g: &Graph, excluded: &[VertexId]) -> Components {
    const UNSEEN: usize = usize::MAX - 1;
    let n = g.num_vertices();
    let mut labels = vec![UNSEEN; n];
    for &v in excluded {
        labels[v] = Components::EXCLUDED;
    }
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != UNSEEN {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if labels[w] == UNSEEN {
                    labels[w] = count;
                    queue.push_back(w);
                }
            }
        }
        count += 1;
    }
    Components { count, labels }
}

/// Dense `rows x dim` matrix of finite `f32` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self, GraphError> {
        if dim == 0 {
            return Err(GraphError::ZeroDim);
        }
        if values.len() != rows * dim {
            return Err(GraphError::FeatureShape {
                rows: values.len() / dim,
                dim,
                expected_rows: rows,
            });
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(GraphError::NonFiniteFeature {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(FeatureMatrix { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, GraphError> {
        let dim = rows.first().map_or(1, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(GraphError::MalformedLine {
                line: r,
                reason: format!("feature row has {} values, expected {dim}", rows[r].len()),
            });
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn zeros(rows: usize, dim: usize) -> Result<Self, GraphError> {
        Self::new(rows, dim, vec![0.0; rows * dim])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, v: VertexId) -> &[f32] {
        &self.values[v * self.dim..(v + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn csr_basics() {
        let g = Graph::from_edges(4, &[(2, 0), (0, 1), (3, 0)]).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        assert_eq!(g.num_edges(), 3);
        assert!(g.check_invariants());
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(
            Graph::from_edges(2, &[(0, 2)]),
            Err(GraphError::VertexOutOfRange { vertex: 2, n: 2 })
        );
        assert_eq!(
            Graph::from_edges(2, &[(1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert_eq!(
            Graph::from_edges(2, &[(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(1, 0))
        );
        assert_eq!(
            Graph::from_edges_dedup(2, &[(0, 1), (1, 0)])
                .unwrap()
                .num_edges(),
            1
        );
    }

    #[test]
    fn components_of_path() {
        let g = path3();
        assert_eq!(components_excluding(&g, &[]).count, 1);
        let c = components_excluding(&g, &[1]);
        assert_eq!(c.count, 2);
        assert_eq!(c.groups(), vec![vec![0], vec![2]]);
        assert_eq!(c.labels[1], Components::EXCLUDED);
    }

    #[test]
    fn components_of_k4_minus_vertex() {
        let g = gen_family(GraphFamily::Complete { n: 4 }).unwrap();
        assert_eq!(components_excluding(&g, &[0]).count, 1);
        assert_eq!(components_excluding(&g, &[0, 1, 2, 3]).count, 0);
    }

    #[test]
    fn feature_matrix_validation() {
        assert_eq!(FeatureMatrix::new(1, 0, vec![]), Err(GraphError::ZeroDim));
        assert!(matches!(
            FeatureMatrix::new(1, 2, vec![0.0, f32::NAN]),
            Err(GraphError::NonFiniteFeature { row: 0, col: 1 })
        ));
        let f = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(f.row(1), &[3.0, 4.0]);
    }
}
