use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Graph, GraphError, VertexId};

const MAX_ER_ATTEMPTS: usize = 1000;

/// Named deterministic graph families used as theorem-check instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphFamily {
    /// Path `0 - 1 - ... - (n-1)`.
    Path {
        n: usize,
    },
    /// Cycle on `n >= 3` vertices.
    Ring {
        n: usize,
    },
    /// Vertex 0 joined to leaves `1..n`.
    Star {
        n: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
    Complete {
        n: usize,
    },
    /// Two `k`-cliques joined by the bridge `(k-1, k)`.
    Barbell {
        k: usize,
    },
    /// `count` cliques of size `k`, consecutive cliques joined by one bridge.
    BridgeCliques {
        k: usize,
        count: usize,
    },
    /// `hubs` mutually adjacent hub vertices, each carrying `leaves` pendant
    /// leaves. Hubs are `0..hubs`; hub `i`'s leaves follow in blocks.
    Hub {
        hubs: usize,
        leaves: usize,
    },
}

impl GraphFamily {
    pub fn name(&self) -> String {
        match *self {
            GraphFamily::Path { n } => format!("path({n})"),
            GraphFamily::Ring { n } => format!("ring({n})"),
            GraphFamily::Star { n } => format!("star({n})"),
            GraphFamily::Grid { rows, cols } => format!("grid({rows}x{cols})"),
            GraphFamily::Complete { n } => format!("complete({n})"),
            GraphFamily::Barbell { k } => format!("barbell({k})"),
            GraphFamily::BridgeCliques { k, count } => format!("bridge_cliques({k}x{count})"),
            GraphFamily::Hub { hubs, leaves } => format!("hub({hubs},{leaves})"),
        }
    }

    /// Family label without parameters, used to group report rows.
    pub fn kind(&self) -> &'static str {
        match self {
            GraphFamily::Path { .. } => "path",
            GraphFamily::Ring { .. } => "ring",
            GraphFamily::Star { .. } => "star",
            GraphFamily::Grid { .. } => "grid",
            GraphFamily::Complete { .. } => "complete",
            GraphFamily::Barbell { .. } => "barbell",
            GraphFamily::BridgeCliques { .. } => "bridge_cliques",
            GraphFamily::Hub { .. } => "hub",
        }
    }
}

fn clique_edges(edges: &mut Vec<(VertexId, VertexId)>, first: VertexId, k: usize) {
    for u in first..first + k {
        for v in u + 1..first + k {
            edges.push((u, v));
        }
    }
}

/// Builds a member of a named family.
pub fn gen_family(family: GraphFamily) -> Result<Graph, GraphError> {
    let invalid = |msg: &str| {
        Err(GraphError::InvalidParams(format!(
            "{}: {msg}",
            family.name()
        )))
    };
    let mut edges = Vec::new();
    let n = match family {
        GraphFamily::Path { n } => {
            if n == 0 {
                return invalid("need n >= 1");
            }
            edges.extend((1..n).map(|v| (v - 1, v)));
            n
        }
        GraphFamily::Ring { n } => {
            if n < 3 {
                return invalid("need n >= 3");
            }
            edges.extend((1..n).map(|v| (v - 1, v)));
            edges.push((0, n - 1));
            n
        }
        GraphFamily::Star { n } => {
            if n < 2 {
                return invalid("need n >= 2");
            }
            edges.extend((1..n).map(|v| (0, v)));
            n
        }
        GraphFamily::Grid { rows, cols } => {
            if rows == 0 || cols == 0 {
                return invalid("need rows, cols >= 1");
            }
            for r in 0..rows {
                for c in 0..cols {
                    let v = r * cols + c;
                    if c + 1 < cols {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < rows {
                        edges.push((v, v + cols));
                    }
                }
            }
            rows * cols
        }
        GraphFamily::Complete { n } => {
            if n == 0 {
                return invalid("need n >= 1");
            }
            clique_edges(&mut edges, 0, n);
            n
        }
        GraphFamily::Barbell { k } => {
            if k < 2 {
                return invalid("need clique size k >= 2");
            }
            return gen_family(GraphFamily::BridgeCliques { k, count: 2 });
        }
        GraphFamily::BridgeCliques { k, count } => {
            if k < 2 || count == 0 {
                return invalid("need k >= 2 and count >= 1");
            }
            for c in 0..count {
                clique_edges(&mut edges, c * k, k);
                if c > 0 {
                    edges.push((c * k - 1, c * k));
                }
            }
            k * count
        }
        GraphFamily::Hub { hubs, leaves } => {
            if hubs == 0 {
                return invalid("need hubs >= 1");
            }
            clique_edges(&mut edges, 0, hubs);
            for h in 0..hubs {
                let first = hubs + h * leaves;
                edges.extend((first..first + leaves).map(|leaf| (h, leaf)));
            }
            hubs * (1 + leaves)
        }
    };
    Graph::from_edges(n, &edges)
}

/// Connected Erdős–Rényi `G(n, p)` sample by rejection.
///
/// Each attempt draws every pair `u < v` in lexicographic order from one
/// ChaCha8 stream seeded by `seed`; the first connected sample is returned.
pub fn gen_er_connected(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParams("er: need n >= 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidParams(format!(
            "er: need 0 < p <= 1, got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ER_ATTEMPTS {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(n, &edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GraphError::GenerationFailed {
        attempts: MAX_ER_ATTEMPTS,
    })
}

/// i.i.d. uniform features on `[-1, 1]`, one row per vertex.
pub fn attach_random_features(
    g: &Graph,
    dim: usize,
    seed: u64,
) -> Result<FeatureMatrix, GraphError> {
    if dim == 0 {
        return Err(GraphError::ZeroDim);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..g.num_vertices() * dim)
        .map(|_| rng.gen_range(-1.0f32..=1.0))
        .collect();
    FeatureMatrix::new(g.num_vertices(), dim, values)
}
