//! Two-worker partition derived from a vertex cut.
//!
//! The cut vertices are split evenly across the two workers (sorted by
//! descending degree, then id, and dealt alternately starting with worker
//! 0). The components of `g - cut` are then placed whole, largest first
//! (ties by smallest member), according to a [`Completion`] rule. Cross
//! edges can only touch cut vertices, since distinct components are never
//! adjacent.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::{Partition, PartitionError, WorkerId};
use crate::graph::{components_excluding, Graph, VertexId};

/// How whole components of `g - cut` are placed on the two workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    /// Keep both boundary sets within `ceil(|cut| / 2)`: each component goes
    /// to the smaller worker (ties to worker 0) unless that breaks the
    /// budget, then to the other worker if that fits, and otherwise to
    /// whichever side yields the smaller maximum boundary set. A worker
    /// still holding no vertex always takes the next component.
    #[default]
    BoundaryBudget,
    /// Each component goes to the worker currently holding fewer vertices,
    /// ties to worker 0.
    SizeBalanced,
}

impl Completion {
    pub fn name(self) -> &'static str {
        match self {
            Completion::BoundaryBudget => "boundary_budget",
            Completion::SizeBalanced => "size_balanced",
        }
    }
}

struct Placement<'g> {
    g: &'g Graph,
    owner: Vec<Option<WorkerId>>,
    boundary: Vec<bool>,
    boundary_count: [usize; 2],
    sizes: [usize; 2],
}

impl<'g> Placement<'g> {
    fn new(g: &'g Graph) -> Self {
        Placement {
            g,
            owner: vec![None; g.num_vertices()],
            boundary: vec![false; g.num_vertices()],
            boundary_count: [0; 2],
            sizes: [0; 2],
        }
    }

    /// Boundary vertices that placing `vertices` on `w` would add, as
    /// `[added on w, added on the other worker]`.
    fn boundary_delta(&self, vertices: &[VertexId], w: WorkerId) -> [usize; 2] {
        let mut on_w = 0;
        let mut touched_other = Vec::new();
        for &v in vertices {
            let mut crosses = false;
            for &u in self.g.neighbors(v) {
                match self.owner[u] {
                    Some(x) if x != w => {
                        crosses = true;
                        if !self.boundary[u] {
                            touched_other.push(u);
                        }
                    }
                    _ => {}
                }
            }
            on_w += usize::from(crosses);
        }
        touched_other.sort_unstable();
        touched_other.dedup();
        [on_w, touched_other.len()]
    }

    fn place(&mut self, vertices: &[VertexId], w: WorkerId) {
        for &v in vertices {
            self.owner[v] = Some(w);
        }
        self.sizes[w] += vertices.len();
        let g = self.g;
        for &v in vertices {
            for &u in g.neighbors(v) {
                if let Some(x) = self.owner[u] {
                    if x != w {
                        self.mark(v);
                        self.mark(u);
                    }
                }
            }
        }
    }

    fn mark(&mut self, v: VertexId) {
        if !self.boundary[v] {
            self.boundary[v] = true;
            self.boundary_count[self.owner[v].expect("placed")] += 1;
        }
    }

    fn smaller_first(&self) -> [WorkerId; 2] {
        if self.sizes[0] <= self.sizes[1] {
            [0, 1]
        } else {
            [1, 0]
        }
    }

    fn resulting_max(&self, vertices: &[VertexId], w: WorkerId) -> usize {
        let [on_w, on_other] = self.boundary_delta(vertices, w);
        (self.boundary_count[w] + on_w).max(self.boundary_count[1 - w] + on_other)
    }
}

/// Partitions `g` over two workers around the vertex cut `cut`.
pub fn vertex_cut_partition(
    g: &Graph,
    cut: &[VertexId],
    completion: Completion,
) -> Result<Partition, PartitionError> {
    let mut cut = cut.to_vec();
    cut.sort_unstable();
    cut.dedup();
    if cut.iter().any(|&v| v >= g.num_vertices()) {
        return Err(PartitionError::NotAVertexCut(cut));
    }
    let components = components_excluding(g, &cut);
    if components.count < 2 {
        return Err(PartitionError::NotAVertexCut(cut));
    }

    let mut placement = Placement::new(g);
    let mut dealt = cut.clone();
    dealt.sort_by_key(|&v| (Reverse(g.degree(v)), v));
    for (i, &v) in dealt.iter().enumerate() {
        placement.place(&[v], i % 2);
    }

    let mut groups = components.groups();
    // groups come ordered by smallest member; the stable sort keeps that as the tie-break
    groups.sort_by_key(|c| Reverse(c.len()));
    let budget = cut.len().div_ceil(2);
    for comp in &groups {
        let order = placement.smaller_first();
        let w = match completion {
            Completion::SizeBalanced => order[0],
            Completion::BoundaryBudget if placement.sizes[order[0]] == 0 => order[0],
            Completion::BoundaryBudget => order
                .into_iter()
                .find(|&w| placement.resulting_max(comp, w) <= budget)
                .unwrap_or_else(|| {
                    order
                        .into_iter()
                        .min_by_key(|&w| placement.resulting_max(comp, w))
                        .expect("two candidates")
                }),
        };
        placement.place(comp, w);
    }

    let assignment = placement
        .owner
        .into_iter()
        .map(|w| w.expect("every vertex placed"))
        .collect();
    Partition::new(assignment, 2)
}
