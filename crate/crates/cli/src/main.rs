//! `abc`: generate graphs, partition them, simulate the exchange protocols,
//! run the bound checks and replay streaming partitioners.
//!
//! Exit status is 0 on success, 1 when a hard check is violated and 2 on
//! usage, input or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use abc_core::aggregation::{results_match, AggregatorKind};
use abc_core::gnn::{forward_centralized, forward_distributed, Activation, GnnLayer};
use abc_core::graph::{
    attach_random_features, gen_er_connected, gen_family, parse_edge_list, to_edge_list,
    FeatureMatrix, Graph, GraphDocument, GraphFamily,
};
use abc_core::partition::{
    boundary_sets, brute_force_edge_cut, brute_force_min_edge_cut, brute_force_vertex_cut,
    flow_vertex_connectivity, greedy_edge_cut, total_cross_edges, vertex_cut_partition, Completion,
    CutCertificate, Partition, PartitionDocument, BRUTE_FORCE_MAX_N,
};
use abc_core::protocol::{count_report, plan, CommReport, Protocol};
use abc_core::stream::{replay, stream_from_graph, Policy, StreamOrder};
use abc_core::verify::{run_suite, SuiteConfig, SuiteReport};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "abc",
    version,
    about = "Communication analysis for partitioned GNN aggregation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it as a graph document or edge list.
    Gen(GenArgs),
    /// Partition a graph over workers.
    Partition(PartitionArgs),
    /// Plan, count and run one exchange protocol on a partitioned graph.
    Simulate(SimulateArgs),
    /// Run the bound checks over a generated corpus.
    Verify(VerifyArgs),
    /// Replay a vertex stream through a streaming partitioner.
    Stream(StreamArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Er,
    Path,
    Ring,
    Star,
    Grid,
    Complete,
    Barbell,
    BridgeCliques,
    Hub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Algo {
    /// Seeded BFS growth plus refinement, any worker count.
    Greedy,
    /// Exhaustive optimal balanced bisection (n <= 16).
    Brute,
    /// Exhaustive minimum edge cut without balance (n <= 16).
    BruteMin,
    /// Two workers around a minimum vertex cut.
    VertexCut,
    /// Uniform random worker per vertex.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum CompletionArg {
    BoundaryBudget,
    SizeBalanced,
}

impl From<CompletionArg> for Completion {
    fn from(c: CompletionArg) -> Self {
        match c {
            CompletionArg::BoundaryBudget => Completion::BoundaryBudget,
            CompletionArg::SizeBalanced => Completion::SizeBalanced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ProtocolArg {
    Standard,
    Abc,
}

fn protocol(p: ProtocolArg, dedup: bool) -> Protocol {
    match p {
        ProtocolArg::Standard => Protocol::Standard { dedup },
        ProtocolArg::Abc => Protocol::Abc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ActivationArg {
    Identity,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum OrderArg {
    Natural,
    Random,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Vertex count (er, path, ring, star, complete).
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Clique size (barbell, bridge_cliques).
    #[arg(long)]
    k: Option<usize>,
    /// Clique count (bridge_cliques).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    hubs: Option<usize>,
    #[arg(long)]
    leaves: Option<usize>,
    /// Attach random features of this dimension; 0 for none.
    #[arg(long, default_value_t = 0)]
    dim: usize,
    #[arg(long, env = "ABC_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the text edge-list format instead of a graph document.
    #[arg(long)]
    edge_list: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PartitionArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Greedy)]
    algo: Algo,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    /// Allowed size deviation, in vertices, from a perfect balance.
    #[arg(long, default_value_t = 1)]
    slack: usize,
    #[arg(long, value_enum, default_value_t = CompletionArg::BoundaryBudget)]
    completion: CompletionArg,
    #[arg(long, env = "ABC_SEED", default_value_t = 0)]
    seed: u64,
    /// Where to write the partition document.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Partition document; without it a random partition over `--workers` is drawn.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Abc)]
    protocol: ProtocolArg,
    /// Standard protocol only: ship each source row once per worker pair.
    #[arg(long)]
    dedup: bool,
    #[arg(long, default_value = "sum")]
    aggregator: AggregatorKind,
    #[arg(long, value_enum, default_value_t = ActivationArg::Identity)]
    activation: ActivationArg,
    /// Feature dimension used when the graph carries no features.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, env = "ABC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// `all` or a comma-separated list of check ids.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Random graphs in the corpus and random multisets per aggregator.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "ABC_SEED")]
    seed: Option<u64>,
    /// Suite config document; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args, Serialize)]
struct StreamArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "boundary")]
    policy: Policy,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    /// Fractional capacity headroom over a perfect balance.
    #[arg(long, default_value_t = abc_core::stream::DEFAULT_SLACK)]
    slack: f64,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Abc)]
    protocol: ProtocolArg,
    #[arg(long)]
    dedup: bool,
    #[arg(long, value_enum, default_value_t = OrderArg::Natural)]
    order: OrderArg,
    #[arg(long, env = "ABC_SEED", default_value_t = 0)]
    seed: u64,
    /// Compare tracked boundary sets against a full recomputation each step.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Serialize)]
struct Metadata {
    generated_at_unix: u64,
    version: &'static str,
}

/// Every report: the command, its resolved config, the result, and
/// run metadata kept apart so payloads compare byte-for-byte.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    config: &'a C,
    result: R,
    metadata: Metadata,
}

fn envelope<C: Serialize, R: Serialize>(command: &str, config: &C, result: R) -> Result<String> {
    let metadata = Metadata {
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(serde_json::to_string_pretty(&Envelope {
        command,
        config,
        result,
        metadata,
    })? + "\n")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes JSON and/or CSV. With `both`, `out` names the JSON file and the
/// CSV goes next to it with a `.csv` extension.
fn emit(out: Option<&Path>, format: Format, json: &str, csv: &str) -> Result<()> {
    match (out, format) {
        (None, Format::Csv) => print!("{csv}"),
        (None, _) => print!("{json}"),
        (Some(p), Format::Json) => write_text(p, json)?,
        (Some(p), Format::Csv) => write_text(p, csv)?,
        (Some(p), Format::Both) => {
            write_text(p, json)?;
            write_text(&p.with_extension("csv"), csv)?;
        }
    }
    Ok(())
}

fn load_graph(path: &Path) -> Result<(Graph, Option<FeatureMatrix>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if text.trim_start().starts_with('{') {
        GraphDocument::from_json(&text).and_then(|doc| doc.to_graph())
    } else {
        parse_edge_list(&text)
    };
    parsed.with_context(|| format!("parsing graph {}", path.display()))
}

fn need<T>(value: Option<T>, flag: &str, kind: Kind) -> Result<T> {
    value.ok_or_else(|| {
        anyhow!(
            "--{flag} is required for --kind {}",
            kind.to_possible_value()
                .expect("no skipped variants")
                .get_name()
        )
    })
}

fn family(a: &GenArgs) -> Result<GraphFamily> {
    let k = a.kind;
    Ok(match k {
        Kind::Er => unreachable!("handled by the caller"),
        Kind::Path => GraphFamily::Path {
            n: need(a.n, "n", k)?,
        },
        Kind::Ring => GraphFamily::Ring {
            n: need(a.n, "n", k)?,
        },
        Kind::Star => GraphFamily::Star {
            n: need(a.n, "n", k)?,
        },
        Kind::Complete => GraphFamily::Complete {
            n: need(a.n, "n", k)?,
        },
        Kind::Grid => GraphFamily::Grid {
            rows: need(a.rows, "rows", k)?,
            cols: need(a.cols, "cols", k)?,
        },
        Kind::Barbell => GraphFamily::Barbell {
            k: need(a.k, "k", k)?,
        },
        Kind::BridgeCliques => GraphFamily::BridgeCliques {
            k: need(a.k, "k", k)?,
            count: need(a.count, "count", k)?,
        },
        Kind::Hub => GraphFamily::Hub {
            hubs: need(a.hubs, "hubs", k)?,
            leaves: need(a.leaves, "leaves", k)?,
        },
    })
}

#[derive(Serialize)]
struct GraphSummary {
    n: usize,
    m: usize,
    d: usize,
    connected: bool,
}

fn cmd_gen(a: &GenArgs) -> Result<ExitCode> {
    let g = match a.kind {
        Kind::Er => gen_er_connected(need(a.n, "n", a.kind)?, need(a.p, "p", a.kind)?, a.seed)?,
        _ => gen_family(family(a)?)?,
    };
    let feats = if a.dim > 0 {
        Some(attach_random_features(&g, a.dim, a.seed)?)
    } else {
        None
    };
    let body = if a.edge_list {
        to_edge_list(&g, feats.as_ref())
    } else {
        GraphDocument::new(&g, feats.as_ref()).to_json() + "\n"
    };
    let summary = GraphSummary {
        n: g.num_vertices(),
        m: g.num_edges(),
        d: a.dim,
        connected: g.is_connected(),
    };
    match &a.out {
        Some(p) => {
            write_text(p, &body)?;
            print!("{}", envelope("gen", a, summary)?);
        }
        None => print!("{body}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PartitionSummary {
    partition: PartitionDocument,
    sizes: Vec<usize>,
    cross_edges: usize,
    boundary_sizes: Vec<usize>,
    certificate: Option<CutCertificate>,
}

fn minimum_vertex_cut(g: &Graph) -> Result<Vec<usize>> {
    if g.num_vertices() <= BRUTE_FORCE_MAX_N {
        match brute_force_vertex_cut(g)? {
            CutCertificate::Vertex { vertices } => return Ok(vertices),
            CutCertificate::Edge { .. } => unreachable!("vertex oracle"),
        }
    }
    if !g.is_connected() {
        bail!("graph is disconnected");
    }
    flow_vertex_connectivity(g)
        .cut
        .ok_or_else(|| anyhow!("complete graph has no vertex cut"))
}

fn cmd_partition(a: &PartitionArgs) -> Result<ExitCode> {
    let (g, _) = load_graph(&a.input)?;
    let two = || {
        if a.workers == 2 {
            Ok(())
        } else {
            Err(anyhow!(
                "--algo {:?} partitions over exactly 2 workers",
                a.algo
            ))
        }
    };
    let (p, certificate) = match a.algo {
        Algo::Greedy => (greedy_edge_cut(&g, a.workers, a.slack, a.seed)?, None),
        Algo::Brute => {
            two()?;
            let (p, c) = brute_force_edge_cut(&g, a.slack)?;
            (p, Some(c))
        }
        Algo::BruteMin => {
            two()?;
            let (p, c) = brute_force_min_edge_cut(&g)?;
            (p, Some(c))
        }
        Algo::VertexCut => {
            two()?;
            let cut = minimum_vertex_cut(&g)?;
            (
                vertex_cut_partition(&g, &cut, a.completion.into())?,
                Some(CutCertificate::Vertex { vertices: cut }),
            )
        }
        Algo::Random => (
            Partition::random(g.num_vertices(), a.workers, a.seed)?,
            None,
        ),
    };
    let summary = PartitionSummary {
        partition: PartitionDocument::from(&p),
        sizes: p.sizes(),
        cross_edges: total_cross_edges(&g, &p),
        boundary_sizes: boundary_sets(&g, &p).iter().map(Vec::len).collect(),
        certificate,
    };
    if let Some(out) = &a.out {
        write_text(out, &(serde_json::to_string(&summary.partition)? + "\n"))?;
    }
    print!("{}", envelope("partition", a, summary)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ProtocolTotals {
    protocol: Protocol,
    total_units: usize,
    total_bytes: usize,
}

#[derive(Serialize)]
struct SimulateResult {
    workers: usize,
    comm: CommReport,
    all_protocols: Vec<ProtocolTotals>,
    forward_max_abs_error: f32,
    forward_matches: bool,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<ExitCode> {
    let (g, feats) = load_graph(&a.input)?;
    let x = match feats {
        Some(x) => x,
        None => attach_random_features(&g, a.dim, a.seed)?,
    };
    let p = match &a.partition {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc: PartitionDocument = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            Partition::try_from(doc)?
        }
        None => Partition::random(g.num_vertices(), a.workers, a.seed)?,
    };
    p.check_graph(&g)?;
    let chosen = protocol(a.protocol, a.dedup);
    let agg = abc_core::aggregation::Aggregator::new(a.aggregator, x.dim());
    let comm = count_report(&plan(&g, &p, chosen)?, &agg);
    let all_protocols = [
        Protocol::Standard { dedup: false },
        Protocol::Standard { dedup: true },
        Protocol::Abc,
    ]
    .into_iter()
    .map(|pr| {
        let r = count_report(&plan(&g, &p, pr)?, &agg);
        Ok(ProtocolTotals {
            protocol: pr,
            total_units: r.total_units,
            total_bytes: r.total_bytes,
        })
    })
    .collect::<Result<Vec<_>>>()?;
    let activation = match a.activation {
        ActivationArg::Identity => Activation::Identity,
        ActivationArg::Relu => Activation::Relu,
    };
    let layer = GnnLayer::random(x.dim(), x.dim(), a.aggregator, activation, a.seed)?;
    let central = forward_centralized(&g, &x, &layer)?;
    let dist = forward_distributed(&g, &p, &x, &layer, chosen)?;
    let forward_max_abs_error = central
        .values()
        .iter()
        .zip(dist.values())
        .map(|(c, d)| (c - d).abs())
        .fold(0.0, f32::max);
    let mut csv = csv::Writer::from_writer(Vec::new());
    for pair in &comm.pairs {
        csv.serialize(pair)?;
    }
    let csv = String::from_utf8(csv.into_inner()?)?;
    let result = SimulateResult {
        workers: p.workers(),
        forward_matches: results_match(a.aggregator, dist.values(), central.values()),
        comm,
        all_protocols,
        forward_max_abs_error,
    };
    emit(
        a.out.as_deref(),
        a.format,
        &envelope("simulate", a, result)?,
        &csv,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn suite_config(a: &VerifyArgs) -> Result<SuiteConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid suite config {}", path.display()))?
        }
        None => SuiteConfig::default(),
    };
    if a.config.is_none() || a.suite != "all" {
        cfg.theorems = a
            .suite
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
    }
    if let Some(t) = a.trials {
        cfg.er_graphs = t;
        cfg.decomposition_trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    let cfg = suite_config(a)?;
    let report: SuiteReport = run_suite(&cfg)?;
    for r in &report.theorems {
        eprintln!(
            "{:<16} {:<16} instances {:>5} skipped {:>4} violations {:>5} ({})",
            r.theorem.name(),
            r.variant.as_deref().unwrap_or("-"),
            r.instances,
            r.skipped,
            r.violations,
            if r.hard { "hard" } else { "soft" }
        );
    }
    emit(
        a.out.as_deref(),
        a.format,
        &envelope("verify", &cfg, &report)?,
        &report.instances_csv(),
    )?;
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct StreamResult<'a> {
    policy: Policy,
    protocol: Protocol,
    capacity: usize,
    final_sizes: &'a [usize],
    steps: &'a [abc_core::stream::StreamStep],
}

fn cmd_stream(a: &StreamArgs) -> Result<ExitCode> {
    let (g, _) = load_graph(&a.input)?;
    let order = match a.order {
        OrderArg::Natural => StreamOrder::Natural,
        OrderArg::Random => StreamOrder::Random,
    };
    let events = stream_from_graph(&g, order, a.seed);
    let r = replay(
        &events,
        a.policy,
        a.workers,
        a.slack,
        protocol(a.protocol, a.dedup),
        a.check,
    )?;
    let result = StreamResult {
        policy: r.policy,
        protocol: r.protocol,
        capacity: r.state.capacity(),
        final_sizes: r.state.sizes(),
        steps: &r.steps,
    };
    emit(
        a.out.as_deref(),
        a.format,
        &envelope("stream", a, result)?,
        &r.series_csv(),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Partition(a) => cmd_partition(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Stream(a) => cmd_stream(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
