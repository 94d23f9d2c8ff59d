use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, TheoremId, TheoremReport, VerifyError, Witness};
use crate::aggregation::{
    aggregate_direct, global_aggregate, input_magnitude, local_aggregate, results_match,
    results_match_scaled, Aggregator, AggregatorKind, SUM_MEAN_TOLERANCE,
};
use crate::graph::{Graph, GraphDocument, VertexId};
use crate::partition::{
    boundary_sets, brute_force_edge_cut, brute_force_min_edge_cut, brute_force_vertex_cut,
    cross_edge_count, vertex_cut_partition, Completion, CutCertificate, Partition,
};
use crate::protocol::{plan_abc, plan_standard};

const MAX_MULTISET: usize = 32;
const MAX_DIM: usize = 8;
const MAX_BLOCKS: usize = 4;
const SPECIAL_VALUES: [f32; 6] = [0.0, -0.0, 1.0, -1.0, 1.0e6, -1.0e-6];

/// One randomized decomposition check, reproducible from `(seed, trial)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTrial {
    pub aggregator: AggregatorKind,
    pub inputs: Vec<Vec<f32>>,
    /// Block of each input.
    pub blocks: Vec<usize>,
    pub block_count: usize,
    pub direct: Vec<f32>,
    pub decomposed: Vec<f32>,
    /// Elementwise [`input_magnitude`] of `inputs`.
    pub magnitude: Vec<f32>,
    /// `|a - b| / max(1, |a|, |b|, magnitude)`, worst coordinate.
    pub rel_error: f64,
    /// `|a - b| / max(1, |a|, |b|)`, worst coordinate.
    pub result_rel_error: f64,
    pub holds: bool,
    /// Whether the result-relative tolerance alone is met.
    pub holds_result_relative: bool,
}

pub fn decomposition_trial(kind: AggregatorKind, seed: u64, trial: usize) -> DecompositionTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial as u64));
    let dim = rng.gen_range(1..=MAX_DIM);
    let size = rng.gen_range(0..=MAX_MULTISET);
    let inputs: Vec<Vec<f32>> = (0..size)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        *SPECIAL_VALUES.choose(&mut rng).expect("non-empty")
                    } else {
                        rng.gen_range(-100.0..100.0)
                    }
                })
                .collect()
        })
        .collect();
    let block_count = rng.gen_range(1..=MAX_BLOCKS);
    let blocks: Vec<usize> = (0..size).map(|_| rng.gen_range(0..block_count)).collect();

    let agg = Aggregator::new(kind, dim);
    let direct = aggregate_direct(&agg, inputs.iter().map(Vec::as_slice))
        .expect("inputs share the trial dim");
    let mut partials: Vec<_> = (0..block_count)
        .map(|b| {
            let members = inputs
                .iter()
                .zip(&blocks)
                .filter(|(_, &x)| x == b)
                .map(|(v, _)| v.as_slice());
            local_aggregate(&agg, members).expect("inputs share the trial dim")
        })
        .collect();
    partials.shuffle(&mut rng);
    let decomposed = global_aggregate(&agg, &partials).expect("partials share kind and dim");
    let magnitude = input_magnitude(&agg, inputs.iter().map(Vec::as_slice))
        .expect("inputs share the trial dim");
    let worst = |floor: &dyn Fn(usize) -> f32| {
        direct
            .iter()
            .zip(&decomposed)
            .enumerate()
            .map(|(i, (&a, &b))| {
                f64::from((a - b).abs()) / f64::from(floor(i).max(a.abs()).max(b.abs()))
            })
            .fold(0.0, f64::max)
    };
    let rel_error = worst(&|i| magnitude[i].max(1.0));
    let result_rel_error = worst(&|_| 1.0);
    let holds = results_match_scaled(kind, &decomposed, &direct, &magnitude);
    let holds_result_relative = results_match(kind, &decomposed, &direct);
    DecompositionTrial {
        aggregator: kind,
        inputs,
        blocks,
        block_count,
        direct,
        decomposed,
        magnitude,
        rel_error,
        result_rel_error,
        holds,
        holds_result_relative,
    }
}

/// Random multisets split at random into 1 to 4 blocks: the local/global
/// pipeline must reproduce the direct aggregate.
pub fn check_decomposition(kind: AggregatorKind, trials: usize, seed: u64) -> TheoremReport {
    let mut report = TheoremReport::new(TheoremId::Decomposition, Some(kind.name().to_string()));
    let note = if kind.is_exact() {
        "compared bit-for-bit".to_string()
    } else {
        format!(
            "compared elementwise within {SUM_MEAN_TOLERANCE:e} relative to max(1, |a|, |b|, input magnitude); \
             the result-only scale is logged as result_relative"
        )
    };
    report.note(&note);
    report.measure("max_rel_error", 0.0);
    report.measure("max_result_rel_error", 0.0);
    for trial in 0..trials {
        let t = decomposition_trial(kind, seed, trial);
        report.measure("max_rel_error", t.rel_error);
        report.measure("max_result_rel_error", t.result_rel_error);
        report.log("result_relative", t.holds_result_relative, || {
            Witness::Decomposition {
                aggregator: kind,
                seed,
                trial,
                detail: format!("result-relative error {:.3e}", t.result_rel_error),
            }
        });
        report.record(!t.holds, || Witness::Decomposition {
            aggregator: kind,
            seed,
            trial,
            detail: format!(
                "{} inputs in {} blocks: decomposed {:?}, direct {:?}",
                t.inputs.len(),
                t.block_count,
                t.decomposed,
                t.direct
            ),
        });
    }
    report
}

/// Outcomes of the ABC upper bound and the two-worker savings bound on one
/// `(graph, partition)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcBounds {
    pub bound: TheoremReport,
    pub savings: TheoremReport,
}

pub fn check_abc_bounds(g: &Graph, p: &Partition) -> Result<AbcBounds, VerifyError> {
    let abc = plan_abc(g, p)?;
    let naive = plan_standard(g, p, false)?;
    let dedup = plan_standard(g, p, true)?;
    let boundary: Vec<usize> = boundary_sets(g, p).iter().map(Vec::len).collect();
    let m = p.workers();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let witness = |theorem, detail: String| {
        Witness::instance(theorem, GraphDocument::new(g, None), Some(p), None, detail)
    };

    let mut bound = TheoremReport::new(TheoremId::AbcBound, None);
    bound.note("bound indexed by the receiving worker's boundary set");
    let over = pairs.iter().find(|&&(i, j)| abc.units(i, j) > boundary[i]);
    bound.record(over.is_some(), || {
        let (i, j) = *over.expect("violation found");
        witness(
            TheoremId::AbcBound,
            format!(
                "abc units {i}<-{j} = {} > |B(w_{i})| = {}",
                abc.units(i, j),
                boundary[i]
            ),
        )
    });
    let sender_over = pairs.iter().find(|&&(i, j)| abc.units(i, j) > boundary[j]);
    bound.log("sender_indexed", sender_over.is_none(), || {
        let (i, j) = *sender_over.expect("failure found");
        witness(
            TheoremId::AbcBound,
            format!(
                "abc units {i}<-{j} = {} > |B(w_{j})| = {}",
                abc.units(i, j),
                boundary[j]
            ),
        )
    });
    for &(i, j) in &pairs {
        bound.measure("max_pair_units", abc.units(i, j) as f64);
    }

    let mut savings = TheoremReport::new(TheoremId::AbcSavings, None);
    savings
        .note("naive standard counting: one row per (boundary vertex, cross neighbor) incidence");
    if m == 2 {
        let shortfall = (0..2).find_map(|i| {
            let j = 1 - i;
            let saved = naive.units(i, j) as i64 - abc.units(i, j) as i64;
            let need = cross_edge_count(g, p, i, j) as i64 - boundary[i] as i64;
            (saved < need)
                .then(|| format!("receiver {i}: savings {saved} < E_c - |B(w_{i})| = {need}"))
        });
        let violated = shortfall.is_some();
        savings.record(violated, || {
            witness(TheoremId::AbcSavings, shortfall.expect("violation found"))
        });
    } else {
        savings.skipped += 1;
        savings.note("savings bound checked on two-worker partitions only");
    }
    let dedup_wins = pairs
        .iter()
        .find(|&&(i, j)| dedup.units(i, j) < abc.units(i, j));
    savings.log("dedup_standard_at_least_abc", dedup_wins.is_none(), || {
        let (i, j) = *dedup_wins.expect("counterexample found");
        witness(
            TheoremId::AbcSavings,
            format!(
                "pair {i}<-{j}: dedup standard {} < abc {}",
                dedup.units(i, j),
                abc.units(i, j)
            ),
        )
    });
    Ok(AbcBounds { bound, savings })
}

fn optimal_vertex_cut(g: &Graph) -> Result<Vec<VertexId>, VerifyError> {
    match brute_force_vertex_cut(g)? {
        CutCertificate::Vertex { vertices } => Ok(vertices),
        CutCertificate::Edge { .. } => unreachable!("vertex oracle returns a vertex certificate"),
    }
}

/// Minimum vertex cut against minimum edge cut, balanced and unconstrained.
pub fn check_cut_relation(g: &Graph) -> Result<TheoremReport, VerifyError> {
    let vc = optimal_vertex_cut(g)?.len();
    let balanced = brute_force_edge_cut(g, 1)?.1.size();
    let unconstrained = brute_force_min_edge_cut(g)?.1.size();
    let mut report = TheoremReport::new(TheoremId::CutRelation, None);
    report.note(
        "edge cuts: sizes within one vertex (balanced) and any two non-empty sides (unconstrained)",
    );
    report.record(vc > balanced || vc > unconstrained, || {
        Witness::instance(
            TheoremId::CutRelation,
            GraphDocument::new(g, None),
            None,
            None,
            format!("|V_c*| = {vc}, |E_c*| balanced {balanced}, unconstrained {unconstrained}"),
        )
    });
    report.measure("vc_star", vc as f64);
    report.measure("ec_star_balanced", balanced as f64);
    report.measure("ec_star_unconstrained", unconstrained as f64);
    Ok(report)
}

/// Boundary and per-pair ABC bounds of the vertex-cut partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionBounds {
    pub boundary: TheoremReport,
    pub pair: TheoremReport,
    pub cut: Vec<VertexId>,
    pub partition: Partition,
}

pub fn check_partition_bounds(
    g: &Graph,
    completion: Completion,
) -> Result<PartitionBounds, VerifyError> {
    let cut = optimal_vertex_cut(g)?;
    let p = vertex_cut_partition(g, &cut, completion)?;
    let k = cut.len();
    let ceiling = k.div_ceil(2);
    let b_star = boundary_sets(g, &p).iter().map(Vec::len).max().unwrap_or(0);
    let abc = plan_abc(g, &p)?;
    let max_pair = abc.units(0, 1).max(abc.units(1, 0));
    let variant = Some(completion.name().to_string());
    let witness = |theorem, detail: String| {
        Witness::instance(
            theorem,
            GraphDocument::new(g, None),
            Some(&p),
            Some(completion),
            detail,
        )
    };
    let note =
        "asserted as ceil(|V_c*| / 2); the unrounded |V_c*| / 2 form is logged as literal_half";

    let mut boundary = TheoremReport::new(TheoremId::BoundaryBound, variant.clone());
    boundary.note(note);
    boundary.record(b_star > ceiling, || {
        witness(
            TheoremId::BoundaryBound,
            format!("B* = {b_star} > ceil({k}/2) = {ceiling}, cut {cut:?}"),
        )
    });
    boundary.log("literal_half", 2 * b_star <= k, || {
        witness(TheoremId::BoundaryBound, format!("B* = {b_star} > {k}/2"))
    });
    boundary.measure("b_star", b_star as f64);
    boundary.measure("vc_star", k as f64);

    let mut pair = TheoremReport::new(TheoremId::PairBound, variant);
    pair.note(note);
    pair.record(max_pair > ceiling, || {
        witness(
            TheoremId::PairBound,
            format!("abc units {max_pair} > ceil({k}/2) = {ceiling}, cut {cut:?}"),
        )
    });
    pair.log("literal_half", 2 * max_pair <= k, || {
        witness(
            TheoremId::PairBound,
            format!("abc units {max_pair} > {k}/2"),
        )
    });
    pair.measure("max_pair_units", max_pair as f64);

    Ok(PartitionBounds {
        boundary,
        pair,
        cut,
        partition: p,
    })
}

/// The quantities behind one improvement measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeasure {
    pub vc_star: usize,
    pub ec_star_balanced: usize,
    pub ec_star_unconstrained: usize,
    /// `|B(w_i)|` under the vertex-cut partition.
    pub vc_boundary: Vec<usize>,
    /// Total naive standard units on the optimal balanced edge cut.
    pub standard_units: usize,
    pub dedup_units: usize,
    /// Total ABC units on the vertex-cut partition.
    pub abc_units: usize,
    /// `standard_units / abc_units`; `None` when no ABC units are sent.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub report: TheoremReport,
    pub measure: InstanceMeasure,
}

pub fn check_improvement(g: &Graph, completion: Completion) -> Result<Improvement, VerifyError> {
    let cut = optimal_vertex_cut(g)?;
    let (edge_partition, edge_cert) = brute_force_edge_cut(g, 1)?;
    let ec_star_unconstrained = brute_force_min_edge_cut(g)?.1.size();
    let vertex_partition = vertex_cut_partition(g, &cut, completion)?;
    let standard_units = plan_standard(g, &edge_partition, false)?.total_units();
    let dedup_units = plan_standard(g, &edge_partition, true)?.total_units();
    let abc_units = plan_abc(g, &vertex_partition)?.total_units();
    let ratio = (abc_units > 0).then(|| standard_units as f64 / abc_units as f64);
    let dedup_ratio = (abc_units > 0).then(|| dedup_units as f64 / abc_units as f64);
    let measure = InstanceMeasure {
        vc_star: cut.len(),
        ec_star_balanced: edge_cert.size(),
        ec_star_unconstrained,
        vc_boundary: boundary_sets(g, &vertex_partition)
            .iter()
            .map(Vec::len)
            .collect(),
        standard_units,
        dedup_units,
        abc_units,
        ratio,
    };

    let mut report =
        TheoremReport::new(TheoremId::Improvement, Some(completion.name().to_string()));
    report.note("ratio = naive standard units on the optimal balanced edge cut / abc units on the vertex-cut partition");
    let witness = |detail: String| {
        Witness::instance(
            TheoremId::Improvement,
            GraphDocument::new(g, None),
            Some(&vertex_partition),
            Some(completion),
            detail,
        )
    };
    report.record(ratio.is_some_and(|r| r < 2.0), || {
        witness(format!("ratio {standard_units}/{abc_units} below 2"))
    });
    report.log(
        "dedup_ratio_at_least_two",
        dedup_ratio.is_none_or(|r| r >= 2.0),
        || witness(format!("dedup ratio {dedup_units}/{abc_units} below 2")),
    );
    if let Some(r) = ratio {
        report.measure("min_ratio", r);
        report.measure("max_ratio", r);
    }
    Ok(Improvement { report, measure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_family, GraphFamily};
    use crate::partition::PartitionError;

    fn fam(f: GraphFamily) -> Graph {
        gen_family(f).unwrap()
    }

    #[test]
    fn decomposition_passes_for_every_kind() {
        for kind in AggregatorKind::ALL {
            let r = check_decomposition(kind, 200, 9);
            assert_eq!((r.instances, r.violations), (200, 0), "{kind:?}");
            if kind.is_exact() {
                assert_eq!(r.measures["max_rel_error"], 0.0);
            }
        }
        assert_eq!(check_decomposition(AggregatorKind::Sum, 0, 1).instances, 0);
    }

    #[test]
    fn decomposition_trials_replay() {
        assert_eq!(
            decomposition_trial(AggregatorKind::Mean, 4, 17),
            decomposition_trial(AggregatorKind::Mean, 4, 17)
        );
    }

    #[test]
    fn abc_bounds_on_star_and_path() {
        let star = fam(GraphFamily::Star { n: 5 });
        let p = Partition::new(vec![0, 0, 1, 1, 1], 2).unwrap();
        let r = check_abc_bounds(&star, &p).unwrap();
        assert!(r.bound.passed() && r.savings.passed());
        assert_eq!(r.savings.instances, 1);

        let path = fam(GraphFamily::Path { n: 3 });
        let r = check_abc_bounds(&path, &Partition::new(vec![0, 0, 1], 2).unwrap()).unwrap();
        assert!(r.bound.passed() && r.savings.passed());
    }

    #[test]
    fn shared_neighbor_is_a_logged_dedup_counterexample() {
        let g = Graph::from_edges(4, &[(0, 2), (1, 2)]).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let r = check_abc_bounds(&g, &p).unwrap();
        assert!(r.savings.passed());
        let logged = r.savings.logged("dedup_standard_at_least_abc").unwrap();
        assert_eq!((logged.held, logged.failed), (0, 1));
    }

    #[test]
    fn savings_needs_two_workers() {
        let g = fam(GraphFamily::Ring { n: 6 });
        let r = check_abc_bounds(&g, &Partition::new(vec![0, 1, 2, 0, 1, 2], 3).unwrap()).unwrap();
        assert_eq!((r.savings.instances, r.savings.skipped), (0, 1));
        assert_eq!(r.bound.instances, 1);
    }

    #[test]
    fn cut_relation_examples() {
        for (f, vc, ec) in [
            (GraphFamily::Path { n: 3 }, 1.0, 1.0),
            (GraphFamily::Barbell { k: 3 }, 1.0, 1.0),
            (GraphFamily::Ring { n: 5 }, 2.0, 2.0),
        ] {
            let r = check_cut_relation(&fam(f)).unwrap();
            assert!(r.passed());
            assert_eq!(
                (r.measures["vc_star"], r.measures["ec_star_balanced"]),
                (vc, ec),
                "{f:?}"
            );
        }
        assert_eq!(
            check_cut_relation(&fam(GraphFamily::Complete { n: 4 })),
            Err(VerifyError::Partition(PartitionError::NoVertexCut))
        );
    }

    #[test]
    fn partition_bounds_examples() {
        let path = check_partition_bounds(&fam(GraphFamily::Path { n: 3 }), Completion::default())
            .unwrap();
        assert_eq!(path.boundary.measures["b_star"], 1.0);
        assert!(path.boundary.passed());
        assert_eq!(path.boundary.logged("literal_half").unwrap().failed, 1);

        let barbell =
            check_partition_bounds(&fam(GraphFamily::Barbell { k: 3 }), Completion::default())
                .unwrap();
        assert!(barbell.boundary.passed() && barbell.pair.passed());

        // both cut vertices become boundary on a ring, whatever the completion
        for c in [Completion::BoundaryBudget, Completion::SizeBalanced] {
            let ring = check_partition_bounds(&fam(GraphFamily::Ring { n: 6 }), c).unwrap();
            assert_eq!(ring.cut, vec![0, 2]);
            assert_eq!(ring.boundary.measures["b_star"], 2.0);
            assert_eq!(ring.boundary.violations, 1);
        }
    }

    #[test]
    fn improvement_examples() {
        let star = check_improvement(&fam(GraphFamily::Star { n: 6 }), Completion::BoundaryBudget)
            .unwrap();
        assert_eq!(
            (star.measure.standard_units, star.measure.abc_units),
            (6, 2)
        );
        assert_eq!(star.measure.ratio, Some(3.0));
        assert!(star.report.passed());

        let path = check_improvement(&fam(GraphFamily::Path { n: 3 }), Completion::BoundaryBudget)
            .unwrap();
        assert_eq!(path.measure.ratio, Some(1.0));
        assert_eq!(path.report.violations, 1);

        let barbell = check_improvement(
            &fam(GraphFamily::Barbell { k: 4 }),
            Completion::BoundaryBudget,
        )
        .unwrap();
        assert!(barbell.measure.ratio.is_some());
    }

    #[test]
    fn witnesses_replay() {
        let path = check_improvement(&fam(GraphFamily::Path { n: 3 }), Completion::BoundaryBudget)
            .unwrap();
        assert!(path.report.witnesses[0].replay().unwrap());
        let ring =
            check_partition_bounds(&fam(GraphFamily::Ring { n: 6 }), Completion::SizeBalanced)
                .unwrap();
        assert!(ring.boundary.witnesses[0].replay().unwrap());
        let star = Witness::instance(
            TheoremId::AbcBound,
            GraphDocument::new(&fam(GraphFamily::Star { n: 5 }), None),
            Some(&Partition::new(vec![0, 0, 1, 1, 1], 2).unwrap()),
            None,
            String::new(),
        );
        assert!(!star.replay().unwrap());
    }
}
