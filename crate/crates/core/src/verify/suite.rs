use std::collections::BTreeMap;
use std::thread;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_abc_bounds, check_cut_relation, check_decomposition, check_improvement,
    check_partition_bounds, derive_seed, TheoremId, TheoremReport, VerifyError,
};
use crate::aggregation::AggregatorKind;
use crate::graph::{gen_er_connected, gen_family, Graph, GraphError, GraphFamily};
use crate::partition::{
    brute_force_edge_cut, Completion, Partition, PartitionError, BRUTE_FORCE_MAX_N,
};

const MAX_COMPLETE_REDRAWS: usize = 100;
const DECOMPOSITION_SALT: u64 = 1 << 40;
const PARTITION_SALT: u64 = 2 << 40;

/// Corpus and check selection for [`run_suite`]. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    /// Theorem ids, or `"all"`.
    pub theorems: Vec<String>,
    pub seed: u64,
    /// Random connected non-complete graphs in the corpus.
    pub er_graphs: usize,
    pub er_min_n: usize,
    pub er_max_n: usize,
    pub er_p_min: f64,
    pub er_p_max: f64,
    pub families: Vec<GraphFamily>,
    /// Random multisets per aggregator.
    pub decomposition_trials: usize,
    /// Random partitions per corpus graph; the first uses two workers.
    pub random_partitions: usize,
    pub max_workers: usize,
    pub completions: Vec<Completion>,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            theorems: vec!["all".to_string()],
            seed: 1,
            er_graphs: 200,
            er_min_n: 4,
            er_max_n: 10,
            er_p_min: 0.25,
            er_p_max: 0.7,
            families: default_families(),
            decomposition_trials: 500,
            random_partitions: 3,
            max_workers: 4,
            completions: vec![Completion::BoundaryBudget, Completion::SizeBalanced],
            threads: 0,
        }
    }
}

fn default_families() -> Vec<GraphFamily> {
    use GraphFamily::*;
    vec![
        Path { n: 3 },
        Path { n: 6 },
        Ring { n: 5 },
        Ring { n: 6 },
        Ring { n: 8 },
        Star { n: 6 },
        Star { n: 8 },
        Star { n: 12 },
        Grid { rows: 3, cols: 3 },
        Grid { rows: 3, cols: 4 },
        Complete { n: 5 },
        Barbell { k: 3 },
        Barbell { k: 4 },
        BridgeCliques { k: 3, count: 3 },
        Hub { hubs: 2, leaves: 3 },
        Hub { hubs: 3, leaves: 3 },
        Hub { hubs: 2, leaves: 5 },
    ]
}

impl SuiteConfig {
    /// Selected theorems in canonical order.
    pub fn resolve_theorems(&self) -> Result<Vec<TheoremId>, VerifyError> {
        let mut out = Vec::new();
        for name in &self.theorems {
            if name == "all" {
                out.extend(TheoremId::ALL);
            } else {
                out.push(name.parse()?);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn validate(&self) -> Result<Vec<TheoremId>, VerifyError> {
        let theorems = self.resolve_theorems()?;
        let bad = |msg: String| Err(VerifyError::InvalidConfig(msg));
        if self.er_min_n < 3 || self.er_min_n > self.er_max_n || self.er_max_n > BRUTE_FORCE_MAX_N {
            return bad(format!(
                "er_min_n..=er_max_n must lie within 3..={BRUTE_FORCE_MAX_N}"
            ));
        }
        if !(0.0 < self.er_p_min && self.er_p_min <= self.er_p_max && self.er_p_max < 1.0) {
            return bad("need 0 < er_p_min <= er_p_max < 1".into());
        }
        if self.max_workers < 2 || self.max_workers > usize::from(u16::MAX) {
            return bad("max_workers must be at least 2".into());
        }
        if theorems.iter().any(|t| {
            matches!(
                t,
                TheoremId::BoundaryBound | TheoremId::PairBound | TheoremId::Improvement
            )
        }) && self.completions.is_empty()
        {
            return bad("vertex-cut checks need at least one completion rule".into());
        }
        if let Some(f) = self
            .families
            .iter()
            .find(|f| gen_family(**f).map_or(true, |g| g.num_vertices() > BRUTE_FORCE_MAX_N))
        {
            return bad(format!(
                "family {} is invalid or exceeds {BRUTE_FORCE_MAX_N} vertices",
                f.name()
            ));
        }
        Ok(theorems)
    }
}

/// One corpus graph under one completion rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub graph_id: String,
    pub family: String,
    pub completion: String,
    pub n: usize,
    pub edges: usize,
    /// Cross edges of the optimal balanced edge cut.
    pub edge_cut_cross_edges: usize,
    /// `|B(w_0)|` and `|B(w_1)|` under the vertex-cut partition.
    pub vc_boundary: String,
    pub vc_star: usize,
    pub ec_star_balanced: usize,
    pub ec_star_unconstrained: usize,
    pub standard_units: usize,
    pub dedup_units: usize,
    pub abc_units: usize,
    /// Empty when no ABC units are sent.
    pub ratio: Option<f64>,
}

const INSTANCE_COLUMNS: [&str; 14] = [
    "graph_id",
    "family",
    "completion",
    "n",
    "edges",
    "edge_cut_cross_edges",
    "vc_boundary",
    "vc_star",
    "ec_star_balanced",
    "ec_star_unconstrained",
    "standard_units",
    "dedup_units",
    "abc_units",
    "ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub family: String,
    pub completion: String,
    pub instances: usize,
    pub infinite: usize,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
    pub at_least_two: usize,
}

impl RatioStats {
    fn from_rows<'a>(
        family: &str,
        completion: &str,
        rows: impl IntoIterator<Item = &'a InstanceRow>,
    ) -> Self {
        let mut instances = 0;
        let mut finite = Vec::new();
        for r in rows {
            instances += 1;
            finite.extend(r.ratio);
        }
        finite.sort_by(f64::total_cmp);
        let infinite = instances - finite.len();
        let median = (!finite.is_empty()).then(|| {
            let mid = finite.len() / 2;
            if finite.len() % 2 == 1 {
                finite[mid]
            } else {
                (finite[mid - 1] + finite[mid]) / 2.0
            }
        });
        RatioStats {
            family: family.to_string(),
            completion: completion.to_string(),
            instances,
            infinite,
            min: finite.first().copied(),
            median,
            mean: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            max: finite.last().copied(),
            at_least_two: infinite + finite.iter().filter(|&&r| r >= 2.0).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub theorems: Vec<TheoremReport>,
    pub instances: Vec<InstanceRow>,
    pub ratio_stats: Vec<RatioStats>,
    /// Violations of the hard checks only.
    pub hard_violations: usize,
    pub passed: bool,
}

impl SuiteReport {
    pub fn theorem(&self, id: TheoremId, variant: Option<&str>) -> Option<&TheoremReport> {
        self.theorems
            .iter()
            .find(|r| r.theorem == id && r.variant.as_deref() == variant)
    }

    /// Reports for `id` across all variants.
    pub fn reports_for(&self, id: TheoremId) -> impl Iterator<Item = &TheoremReport> {
        self.theorems.iter().filter(move |r| r.theorem == id)
    }

    pub fn ratio_stats_for(&self, family: &str, completion: Completion) -> Option<&RatioStats> {
        self.ratio_stats
            .iter()
            .find(|s| s.family == family && s.completion == completion.name())
    }

    /// One row per (instance, completion); the header is written even when
    /// no instance was measured.
    pub fn instances_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.instances {
            w.serialize(row).expect("rows are flat records");
        }
        if self.instances.is_empty() {
            w.write_record(INSTANCE_COLUMNS).expect("header");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
    }
}

struct CorpusGraph {
    id: String,
    family: String,
    graph: Graph,
}

fn build_corpus(cfg: &SuiteConfig) -> Result<Vec<CorpusGraph>, VerifyError> {
    let mut corpus = Vec::new();
    for i in 0..cfg.er_graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
        let graph = (0..MAX_COMPLETE_REDRAWS)
            .map(|_| {
                let n = rng.gen_range(cfg.er_min_n..=cfg.er_max_n);
                let p = rng.gen_range(cfg.er_p_min..=cfg.er_p_max);
                gen_er_connected(n, p, rng.next_u64())
            })
            .find(|g| !matches!(g, Ok(g) if g.is_complete()))
            .unwrap_or(Err(GraphError::GenerationFailed {
                attempts: MAX_COMPLETE_REDRAWS,
            }))?;
        corpus.push(CorpusGraph {
            id: format!("er-{i}"),
            family: "er".to_string(),
            graph,
        });
    }
    for f in &cfg.families {
        corpus.push(CorpusGraph {
            id: f.name(),
            family: f.kind().to_string(),
            graph: gen_family(*f)?,
        });
    }
    Ok(corpus)
}

/// Whether an oracle refused the instance for lack of a vertex cut.
fn skippable(e: &VerifyError) -> bool {
    matches!(
        e,
        VerifyError::Partition(PartitionError::NoVertexCut | PartitionError::Disconnected)
    )
}

#[derive(Default)]
struct Outcome {
    reports: Vec<TheoremReport>,
    rows: Vec<InstanceRow>,
}

impl Outcome {
    fn skip(&mut self, theorem: TheoremId, variant: Option<String>) {
        let mut r = TheoremReport::new(theorem, variant);
        r.skipped = 1;
        self.reports.push(r);
    }
}

fn analyze(
    cfg: &SuiteConfig,
    theorems: &[TheoremId],
    index: usize,
    entry: &CorpusGraph,
) -> Result<Outcome, VerifyError> {
    let g = &entry.graph;
    let n = g.num_vertices();
    let mut out = Outcome::default();
    let wants = |t| theorems.contains(&t);
    let has_cut = g.is_connected() && !g.is_complete();

    if wants(TheoremId::AbcBound) || wants(TheoremId::AbcSavings) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            derive_seed(cfg.seed, PARTITION_SALT),
            index as u64,
        ));
        let mut partitions = Vec::new();
        for r in 0..cfg.random_partitions {
            let m = if r == 0 {
                2
            } else {
                rng.gen_range(2..=cfg.max_workers)
            };
            partitions.push(Partition::random(n, m, rng.next_u64())?);
        }
        if has_cut {
            partitions.push(brute_force_edge_cut(g, 1)?.0);
            let cut =
                check_partition_bounds(g, cfg.completions.first().copied().unwrap_or_default())?;
            partitions.push(cut.partition);
        }
        for p in &partitions {
            let b = check_abc_bounds(g, p)?;
            out.reports.extend(
                [b.bound, b.savings]
                    .into_iter()
                    .filter(|r| wants(r.theorem)),
            );
        }
    }
    if wants(TheoremId::CutRelation) {
        match check_cut_relation(g) {
            Ok(r) => out.reports.push(r),
            Err(e) if skippable(&e) => out.skip(TheoremId::CutRelation, None),
            Err(e) => return Err(e),
        }
    }
    for &c in &cfg.completions {
        let variant = Some(c.name().to_string());
        if wants(TheoremId::BoundaryBound) || wants(TheoremId::PairBound) {
            match check_partition_bounds(g, c) {
                Ok(b) => out.reports.extend(
                    [b.boundary, b.pair]
                        .into_iter()
                        .filter(|r| wants(r.theorem)),
                ),
                Err(e) if skippable(&e) => {
                    for t in [TheoremId::BoundaryBound, TheoremId::PairBound]
                        .into_iter()
                        .filter(|&t| wants(t))
                    {
                        out.skip(t, variant.clone());
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if wants(TheoremId::Improvement) {
            match check_improvement(g, c) {
                Ok(imp) => {
                    let m = imp.measure;
                    out.rows.push(InstanceRow {
                        graph_id: entry.id.clone(),
                        family: entry.family.clone(),
                        completion: c.name().to_string(),
                        n,
                        edges: g.num_edges(),
                        edge_cut_cross_edges: m.ec_star_balanced,
                        vc_boundary: m
                            .vc_boundary
                            .iter()
                            .map(ToString::to_string)
                            .collect::<Vec<_>>()
                            .join("|"),
                        vc_star: m.vc_star,
                        ec_star_balanced: m.ec_star_balanced,
                        ec_star_unconstrained: m.ec_star_unconstrained,
                        standard_units: m.standard_units,
                        dedup_units: m.dedup_units,
                        abc_units: m.abc_units,
                        ratio: m.ratio,
                    });
                    out.reports.push(imp.report);
                }
                Err(e) if skippable(&e) => out.skip(TheoremId::Improvement, variant),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Two boundary vertices sharing their only cross neighbor: dedup standard
/// sends one row where ABC sends two partials.
pub fn shared_neighbor_instance() -> (Graph, Partition) {
    let g = Graph::from_edges(4, &[(0, 2), (1, 2)]).expect("valid edges");
    (
        g,
        Partition::new(vec![0, 0, 1, 1], 2).expect("valid assignment"),
    )
}

fn thread_count(cfg: &SuiteConfig, jobs: usize) -> usize {
    let wanted = if cfg.threads == 0 {
        thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.threads
    };
    wanted.clamp(1, jobs.max(1))
}

/// Runs the selected checks over the configured corpus. Output is
/// independent of the thread count.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport, VerifyError> {
    let theorems = config.validate()?;
    let mut merged: BTreeMap<(TheoremId, Option<String>), TheoremReport> = BTreeMap::new();
    let mut slot = |r: TheoremReport| match merged.get_mut(&(r.theorem, r.variant.clone())) {
        Some(existing) => existing.absorb(r),
        None => {
            merged.insert((r.theorem, r.variant.clone()), r);
        }
    };
    for &t in &theorems {
        match t {
            TheoremId::Decomposition => {
                for kind in AggregatorKind::ALL {
                    let seed = derive_seed(
                        config.seed,
                        DECOMPOSITION_SALT + u64::from(kind.wire_code()),
                    );
                    slot(check_decomposition(kind, config.decomposition_trials, seed));
                }
            }
            TheoremId::AbcBound | TheoremId::AbcSavings | TheoremId::CutRelation => {
                slot(TheoremReport::new(t, None))
            }
            _ => config
                .completions
                .iter()
                .for_each(|c| slot(TheoremReport::new(t, Some(c.name().to_string())))),
        }
    }

    let needs_corpus = theorems.iter().any(|&t| t != TheoremId::Decomposition);
    let corpus = if needs_corpus {
        build_corpus(config)?
    } else {
        Vec::new()
    };
    let threads = thread_count(config, corpus.len());
    let chunk = corpus.len().div_ceil(threads).max(1);
    let outcomes: Vec<Result<Outcome, VerifyError>> = thread::scope(|s| {
        let handles: Vec<_> = corpus
            .chunks(chunk)
            .enumerate()
            .map(|(c, entries)| {
                let theorems = &theorems;
                s.spawn(move || {
                    entries
                        .iter()
                        .enumerate()
                        .map(|(k, e)| analyze(config, theorems, c * chunk + k, e))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("suite worker panicked"))
            .collect()
    });

    let mut rows = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        outcome.reports.into_iter().for_each(&mut slot);
        rows.extend(outcome.rows);
    }
    if needs_corpus
        && (theorems.contains(&TheoremId::AbcBound) || theorems.contains(&TheoremId::AbcSavings))
    {
        let (g, p) = shared_neighbor_instance();
        let b = check_abc_bounds(&g, &p)?;
        [b.bound, b.savings]
            .into_iter()
            .filter(|r| theorems.contains(&r.theorem))
            .for_each(&mut slot);
    }

    let mut ratio_stats = Vec::new();
    for c in &config.completions {
        let of_completion: Vec<&InstanceRow> =
            rows.iter().filter(|r| r.completion == c.name()).collect();
        if of_completion.is_empty() {
            continue;
        }
        let mut families: Vec<&str> = of_completion.iter().map(|r| r.family.as_str()).collect();
        families.sort_unstable();
        families.dedup();
        for f in families {
            ratio_stats.push(RatioStats::from_rows(
                f,
                c.name(),
                of_completion.iter().copied().filter(|r| r.family == f),
            ));
        }
        ratio_stats.push(RatioStats::from_rows(
            "all",
            c.name(),
            of_completion.iter().copied(),
        ));
    }

    let theorems: Vec<TheoremReport> = merged.into_values().collect();
    let hard_violations = theorems
        .iter()
        .filter(|r| r.hard)
        .map(|r| r.violations)
        .sum();
    Ok(SuiteReport {
        config: config.clone(),
        theorems,
        instances: rows,
        ratio_stats,
        hard_violations,
        passed: hard_violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            er_graphs: 12,
            decomposition_trials: 20,
            families: default_families()[..6].to_vec(),
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn empty_theorem_list_gives_empty_report() {
        let report = run_suite(&SuiteConfig {
            theorems: vec![],
            ..small()
        })
        .unwrap();
        assert!(report.theorems.is_empty() && report.instances.is_empty() && report.passed);
    }

    #[test]
    fn unknown_theorem_is_invalid() {
        let cfg = SuiteConfig {
            theorems: vec!["no_such_check".into()],
            ..small()
        };
        assert!(matches!(
            run_suite(&cfg),
            Err(VerifyError::InvalidConfig(_))
        ));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"seed": 3, "bogus": 1}"#).is_err());
        let cfg: SuiteConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.er_graphs, 200);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let one = run_suite(&SuiteConfig {
            threads: 1,
            ..small()
        })
        .unwrap();
        let four = run_suite(&SuiteConfig {
            threads: 4,
            ..small()
        })
        .unwrap();
        let payload = |r: &SuiteReport| {
            serde_json::to_string(&(&r.theorems, &r.instances, &r.ratio_stats)).unwrap()
        };
        assert_eq!(payload(&one), payload(&four));
        assert!(one.passed, "hard violations: {}", one.hard_violations);
    }

    #[test]
    fn report_shape() {
        let report = run_suite(&small()).unwrap();
        assert_eq!(report.reports_for(TheoremId::Decomposition).count(), 4);
        assert_eq!(report.reports_for(TheoremId::Improvement).count(), 2);
        let cut = report.theorem(TheoremId::CutRelation, None).unwrap();
        assert_eq!(cut.instances, 12 + 6);
        let savings = report.theorem(TheoremId::AbcSavings, None).unwrap();
        assert!(
            savings
                .logged("dedup_standard_at_least_abc")
                .unwrap()
                .failed
                >= 1
        );
        let stats = report
            .ratio_stats_for("star", Completion::BoundaryBudget)
            .unwrap();
        assert_eq!((stats.instances, stats.at_least_two), (1, 1));
        let csv = report.instances_csv();
        assert_eq!(csv.lines().count(), 1 + report.instances.len());
        assert!(csv.starts_with("graph_id,family,completion,n,edges"));

        let empty = run_suite(&SuiteConfig {
            theorems: vec!["cut_relation".into()],
            ..small()
        })
        .unwrap();
        assert!(empty.instances.is_empty());
        assert_eq!(
            empty.instances_csv(),
            csv.lines().next().unwrap().to_string() + "\n"
        );
    }
}
