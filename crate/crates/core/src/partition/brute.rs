//! Exhaustive optimal-cut oracles for small graphs.

use itertools::Itertools;

use super::{CutCertificate, Partition, PartitionError};
use crate::graph::{components_excluding, Graph};

/// Largest graph the exhaustive searches accept.
pub const BRUTE_FORCE_MAX_N: usize = 16;

fn check_size(g: &Graph) -> Result<usize, PartitionError> {
    let n = g.num_vertices();
    if n > BRUTE_FORCE_MAX_N {
        return Err(PartitionError::TooLarge {
            n,
            cap: BRUTE_FORCE_MAX_N,
        });
    }
    Ok(n)
}

/// Enumerates 2-way assignments in lexicographic order of the assignment
/// vector (vertex 0 most significant) and keeps the first one with the
/// fewest cut edges among those accepted by `admissible(size_of_worker_1)`.
fn min_bipartition(
    g: &Graph,
    admissible: impl Fn(usize) -> bool,
) -> Option<(Partition, CutCertificate)> {
    let n = g.num_vertices();
    let adj: Vec<u32> = g
        .vertices()
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u)))
        .collect();
    let mut best: Option<(usize, u32)> = None;
    for k in 0u32..(1u32 << n) {
        // bit v of `mask` is set when vertex v sits on worker 1
        let mask = if n == 0 {
            0
        } else {
            k.reverse_bits() >> (32 - n)
        };
        if !admissible(mask.count_ones() as usize) {
            continue;
        }
        let cut: usize = (0..n)
            .filter(|&v| mask & (1 << v) != 0)
            .map(|v| (adj[v] & !mask).count_ones() as usize)
            .sum();
        if best.is_none_or(|(c, _)| cut < c) {
            best = Some((cut, mask));
        }
    }
    let (_, mask) = best?;
    let assignment = (0..n).map(|v| ((mask >> v) & 1) as usize).collect();
    let p = Partition::new(assignment, 2).expect("two workers");
    let edges = g
        .edges()
        .filter(|&(u, v)| p.worker_of(u) != p.worker_of(v))
        .collect();
    Some((p, CutCertificate::Edge { edges }))
}

/// Minimum edge-cut bipartition whose part sizes differ by at most
/// `max(1, slack)`. Ties go to the lexicographically smallest assignment.
pub fn brute_force_edge_cut(
    g: &Graph,
    slack: usize,
) -> Result<(Partition, CutCertificate), PartitionError> {
    let n = check_size(g)?;
    if n == 0 {
        return Err(PartitionError::TooSmall(1));
    }
    let allowed = slack.max(1);
    Ok(
        min_bipartition(g, |ones| ones.abs_diff(n - ones) <= allowed)
            .expect("a balanced split always exists"),
    )
}

/// Global minimum edge cut: both sides non-empty, no balance constraint.
pub fn brute_force_min_edge_cut(g: &Graph) -> Result<(Partition, CutCertificate), PartitionError> {
    let n = check_size(g)?;
    if n < 2 {
        return Err(PartitionError::TooSmall(2));
    }
    Ok(min_bipartition(g, |ones| ones > 0 && ones < n).expect("n >= 2 admits a split"))
}

/// Smallest vertex set whose removal leaves at least two components.
/// Candidates are tried by increasing size, lexicographically within a size.
pub fn brute_force_vertex_cut(g: &Graph) -> Result<CutCertificate, PartitionError> {
    let n = check_size(g)?;
    if !g.is_connected() {
        return Err(PartitionError::Disconnected);
    }
    if g.is_complete() {
        return Err(PartitionError::NoVertexCut);
    }
    for size in 1..n {
        for subset in (0..n).combinations(size) {
            if components_excluding(g, &subset).count >= 2 {
                return Ok(CutCertificate::Vertex { vertices: subset });
            }
        }
    }
    unreachable!("a connected non-complete graph has a vertex cut")
}
