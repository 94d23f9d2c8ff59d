//! Vertex connectivity by max-flow on the vertex-split graph.
//!
//! Each vertex `v` becomes `v_in -> v_out` with capacity 1; each undirected
//! edge `{u, v}` becomes `u_out -> v_in` and `v_out -> u_in` with unbounded
//! capacity. The max `s_out -> t_in` flow then counts internally
//! vertex-disjoint `s-t` paths, and a saturated-split min cut is a minimum
//! `s-t` separator.

use std::collections::VecDeque;

use crate::graph::{Graph, VertexId};

const UNBOUNDED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexConnectivity {
    pub kappa: usize,
    /// A minimum separator when one exists (`kappa < n - 1`), ascending.
    pub cut: Option<Vec<VertexId>>,
}

struct Arc {
    to: usize,
    cap: u32,
}

/// Dinic max-flow over an arc list where arc `i ^ 1` is the reverse of `i`.
struct FlowNet {
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
    level: Vec<i32>,
    next: Vec<usize>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        FlowNet {
            arcs: Vec::new(),
            out: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            next: vec![0; nodes],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: u32) {
        self.out[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.out[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0 });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.out[u] {
                let Arc { to, cap } = self.arcs[a];
                if cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
    }

    fn augment(&mut self, u: usize, t: usize, pushed: u32) -> u32 {
        if u == t {
            return pushed;
        }
        while self.next[u] < self.out[u].len() {
            let a = self.out[u][self.next[u]];
            let Arc { to, cap } = self.arcs[a];
            if cap > 0 && self.level[to] == self.level[u] + 1 {
                let got = self.augment(to, t, pushed.min(cap));
                if got > 0 {
                    if self.arcs[a].cap != UNBOUNDED {
                        self.arcs[a].cap -= got;
                    }
                    if self.arcs[a ^ 1].cap != UNBOUNDED {
                        self.arcs[a ^ 1].cap += got;
                    }
                    return got;
                }
            }
            self.next[u] += 1;
        }
        0
    }

    /// Max flow, stopping early once it reaches `limit`.
    fn max_flow(&mut self, s: usize, t: usize, limit: usize) -> usize {
        let mut flow = 0;
        while flow < limit {
            self.bfs(s);
            if self.level[t] < 0 {
                break;
            }
            self.next.iter_mut().for_each(|n| *n = 0);
            while flow < limit {
                let got = self.augment(s, t, UNBOUNDED);
                if got == 0 {
                    break;
                }
                flow += got as usize;
            }
        }
        flow
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.out.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.out[u] {
                let Arc { to, cap } = self.arcs[a];
                if cap > 0 && !seen[to] {
                    seen[to] = true;
                    queue.push_back(to);
                }
            }
        }
        seen
    }
}

fn split_net(g: &Graph) -> FlowNet {
    let mut net = FlowNet::new(2 * g.num_vertices());
    for v in g.vertices() {
        net.add(2 * v, 2 * v + 1, 1);
    }
    for (u, v) in g.edges() {
        net.add(2 * u + 1, 2 * v, UNBOUNDED);
        net.add(2 * v + 1, 2 * u, UNBOUNDED);
    }
    net
}

/// Minimum `s-t` separator size for non-adjacent `s != t`, capped at
/// `limit`, with the separator when the flow stayed below the cap.
fn local_connectivity(
    g: &Graph,
    s: VertexId,
    t: VertexId,
    limit: usize,
) -> (usize, Option<Vec<VertexId>>) {
    let mut net = split_net(g);
    let flow = net.max_flow(2 * s + 1, 2 * t, limit);
    if flow >= limit {
        return (flow, None);
    }
    let seen = net.reachable(2 * s + 1);
    let cut = g
        .vertices()
        .filter(|&v| seen[2 * v] && !seen[2 * v + 1])
        .collect();
    (flow, Some(cut))
}

/// Vertex connectivity of a connected graph.
///
/// Pairs are scheduled as in Even's algorithm: sources `0..=kappa` (the
/// running best), each against every later non-adjacent vertex. Some source
/// among the first `kappa + 1` lies outside a minimum separator, and every
/// vertex on another side of it has a larger id.
pub fn flow_vertex_connectivity(g: &Graph) -> VertexConnectivity {
    let n = g.num_vertices();
    let mut best = VertexConnectivity {
        kappa: n.saturating_sub(1),
        cut: None,
    };
    let mut s = 0;
    while s < n && s <= best.kappa {
        for t in s + 1..n {
            if g.has_edge(s, t) {
                continue;
            }
            let (k, cut) = local_connectivity(g, s, t, best.kappa);
            if k < best.kappa {
                best = VertexConnectivity { kappa: k, cut };
            }
        }
        s += 1;
    }
    best
}
