mod config;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use a2a_core::bounds::{graph_distance_bound, BoundReport};
use a2a_core::deadlock::{lash_sequential, verify_layers, LayerVerdict};
use a2a_core::graph::{self, gen, Digraph, PunctureMode};
use a2a_core::mcf::{
    all_to_all_among, mcf_decomposed, mcf_link, mcf_master, mcf_path, mcf_timestepped, Commodity, LinkFlowSolution,
    McfOptions, TimeExpandedSolution,
};
use a2a_core::routes::{self, WeightedPathSet};
use a2a_core::schedc::{self, ScheduleMode, DEFAULT_Q_MAX};
use a2a_core::simkit::{self, Algorithm, StudyOptions, TopologySpec};
use a2a_lp::{IlpOptions, Solver, SolverKind};
use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::manifest::{FileDigest, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "a2a", version, about = "All-to-all schedule synthesis for direct-connect topologies")]
struct Cli {
    /// Root seed; every randomized step draws from a named substream of it.
    #[arg(long, global = true, env = "A2A_SEED")]
    seed: Option<u64>,
    /// Worker threads for parallel solves; 0 uses every core.
    #[arg(long, global = true, env = "A2A_WORKERS")]
    workers: Option<usize>,
    /// LP solver: `reference`, `external` or `external:<name>`.
    #[arg(long, global = true, env = "A2A_SOLVER")]
    solver: Option<String>,
    /// TOML file with defaults for seed, workers, solver and q_max.
    #[arg(long, global = true, env = "A2A_CONFIG")]
    config: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a topology as graph JSON.
    Gen(GenArgs),
    /// Solve a flow formulation on a graph.
    Solve(SolveArgs),
    /// Produce a weighted route set.
    Routes(RoutesArgs),
    /// Print lower bounds on all-to-all time.
    Bound(BoundArgs),
    /// Compile a solution to a schedule XML.
    Compile(CompileArgs),
    /// Assign routes to deadlock-free virtual layers.
    Layers(LayersArgs),
    /// Evaluate a schedule, a route set or an algorithm on one graph.
    Eval(EvalArgs),
    /// Evaluate one algorithm across topologies.
    Compare(CompareArgs),
    /// Time algorithms on generalized Kautz graphs.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output file; stdout when absent (and then no manifest is written).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Topo {
    Kautz,
    Debruijn,
    Torus,
    Ring,
    Hypercube,
    Twisted,
    Bipartite,
    Complete,
    Random,
    Expander,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    topo: Topo,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Hypercube dimension.
    #[arg(long)]
    k: Option<usize>,
    /// Torus extents, e.g. 3,3,3.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Split nodes into host and NIC with host links of this capacity.
    #[arg(long)]
    host_cap: Option<f64>,
    /// Remove this many random bidirectional link pairs.
    #[arg(long, default_value_t = 0)]
    puncture_edges: usize,
    /// Remove this many random nodes.
    #[arg(long, default_value_t = 0)]
    puncture_nodes: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum SolveAlgo {
    Link,
    Decomp,
    Master,
    Ts,
    PmcfDisjoint,
    PmcfEnum,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: SolveAlgo,
    #[arg(long)]
    graph: PathBuf,
    /// Step count for `ts`, path length bound for `pmcf-enum`; defaults to the diameter.
    #[arg(long)]
    lmax: Option<usize>,
    /// Lift the size guards on the link formulation.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum RoutesAlgo {
    Sssp,
    LoadAwareSp,
    Ewsp,
    Dor,
    Disjoint,
    Enum,
    Extract,
    Ilp,
}

#[derive(Args, Debug)]
struct RoutesArgs {
    #[arg(long, value_enum)]
    algo: RoutesAlgo,
    #[arg(long)]
    graph: PathBuf,
    /// Flow solution for `extract`.
    #[arg(long)]
    sol: Option<PathBuf>,
    /// Optimality slack for `ilp`.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Path length bound for `enum`.
    #[arg(long)]
    lmax: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Take n and d from this graph and add its distance bound.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum CompileMode {
    Ts,
    Path,
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[arg(long, value_enum)]
    mode: CompileMode,
    #[arg(long)]
    graph: PathBuf,
    /// `ts` solution from `solve`, or a route file for `path`.
    #[arg(long)]
    sol: PathBuf,
    /// Shard size in bytes.
    #[arg(long, default_value_t = 1 << 20)]
    m: u64,
    #[arg(long)]
    q_max: Option<u64>,
    /// Schedule XML; path mode also writes `<out>.routes.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LayersArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    routes: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_layers: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Route file to evaluate under the fluid model.
    #[arg(long)]
    routes: Option<PathBuf>,
    /// Schedule XML; path-mode schedules also need --routes.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Algorithm to run and evaluate.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Per-step synchronization cost for link schedules.
    #[arg(long, default_value_t = 0.0)]
    sync: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Topologies such as `kautz:n=100,d=4` or `torus:dims=10x10`.
    #[arg(long = "topo", required = true)]
    topos: Vec<String>,
    #[arg(long, default_value = "master")]
    algo: String,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "link,decomp")]
    algos: Vec<String>,
    /// Per-run limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

/// Flow solutions as stored by `solve`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum SolutionFile {
    Link { algo: String, f: f64, solution: LinkFlowSolution },
    Master { f: f64 },
    Timestep { total_u: f64, solution: TimeExpandedSolution },
    Path { algo: String, f: f64, routes: WeightedPathSet },
}

struct Ctx {
    seed: u64,
    workers: usize,
    solver: Solver,
    solver_name: String,
    q_max: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn mcf(&self) -> McfOptions {
        McfOptions { workers: self.workers, ..McfOptions::with_solver(self.solver.clone()) }
    }

    fn ilp(&self) -> IlpOptions {
        IlpOptions { solver: self.solver.clone(), ..Default::default() }
    }

    /// Independent seed for a named use of the root seed (SplitMix64 over
    /// the seed mixed with an FNV-1a hash of the name).
    fn substream(&self, name: &str) -> u64 {
        let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        let mut z = self.seed ^ h;
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn graph(&mut self, path: &Path) -> anyhow::Result<Digraph> {
        self.inputs.push(path.to_path_buf());
        Ok(graph::load_graph(path)?)
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> anyhow::Result<T> {
        self.inputs.push(path.to_path_buf());
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn emit(&mut self, out: &OutArg, text: &str) -> anyhow::Result<()> {
        match &out.out {
            Some(p) => self.write(p, text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    fn write(&mut self, path: &Path, text: &str) -> anyhow::Result<()> {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Commodities of a graph: all host pairs for host-augmented graphs, every
/// node pair otherwise.
fn commodities(g: &Digraph) -> Option<Vec<Commodity>> {
    let hosts = g.meta().params.get("hosts")?.as_u64()? as usize;
    Some(all_to_all_among(&(0..hosts).collect::<Vec<_>>()))
}

/// An argument combination clap cannot express; exits like a parse error.
fn usage(msg: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("{msg}").context("usage")
}

fn need<T>(v: Option<T>, flag: &str, topo: Topo) -> anyhow::Result<T> {
    v.ok_or_else(|| usage(format!("--topo {topo:?} needs --{flag}")))
}

fn cmd_gen(ctx: &mut Ctx, a: &GenArgs) -> anyhow::Result<()> {
    let t = a.topo;
    let spec = match t {
        Topo::Kautz => TopologySpec::Kautz { n: need(a.n, "n", t)?, d: need(a.d, "d", t)? },
        Topo::Debruijn => TopologySpec::DeBruijn { n: need(a.n, "n", t)?, d: need(a.d, "d", t)? },
        Topo::Torus => {
            if a.dims.is_empty() {
                return Err(usage("--topo torus needs --dims"));
            }
            TopologySpec::Torus { dims: a.dims.clone() }
        }
        Topo::Ring => TopologySpec::Ring { n: need(a.n, "n", t)? },
        Topo::Hypercube => TopologySpec::Hypercube { k: need(a.k, "k", t)? },
        Topo::Twisted => TopologySpec::Twisted { k: need(a.k, "k", t)? },
        Topo::Bipartite => TopologySpec::Bipartite { n: need(a.n, "n", t)? },
        Topo::Complete => TopologySpec::Complete { n: need(a.n, "n", t)? },
        Topo::Random => TopologySpec::Random { n: need(a.n, "n", t)?, d: need(a.d, "d", t)?, seed: ctx.substream("gen") },
        Topo::Expander => {
            TopologySpec::Expander { n: need(a.n, "n", t)?, d: need(a.d, "d", t)?, seed: ctx.substream("gen") }
        }
    };
    let mut g = spec.build()?;
    if a.puncture_edges > 0 {
        g = gen::puncture(&g, PunctureMode::Edges, a.puncture_edges, ctx.substream("puncture-edges"))?;
    }
    if a.puncture_nodes > 0 {
        g = gen::puncture(&g, PunctureMode::Nodes, a.puncture_nodes, ctx.substream("puncture-nodes"))?;
    }
    if let Some(c) = a.host_cap {
        g = gen::augment_host_bottleneck(&g, c)?.0;
    }
    ctx.emit(&a.out, &pretty(&graph::to_json(&g))?)
}

fn cmd_solve(ctx: &mut Ctx, a: &SolveArgs) -> anyhow::Result<()> {
    let g = ctx.graph(&a.graph)?;
    let coms = commodities(&g);
    let mut opts = ctx.mcf();
    opts.force = a.force;
    let lmax = || -> anyhow::Result<usize> { Ok(a.lmax.unwrap_or(graph::diameter(&g)? as usize)) };
    let file = match a.algo {
        SolveAlgo::Link => {
            let s = mcf_link(&g, coms.as_deref(), &opts)?;
            SolutionFile::Link { algo: "link".into(), f: s.f, solution: s }
        }
        SolveAlgo::Decomp => {
            let s = mcf_decomposed(&g, coms.as_deref(), &opts)?;
            SolutionFile::Link { algo: "decomp".into(), f: s.f, solution: s }
        }
        SolveAlgo::Master => SolutionFile::Master { f: mcf_master(&g, coms.as_deref(), &opts)?.f },
        SolveAlgo::Ts => {
            let s = mcf_timestepped(&g, lmax()?, coms.as_deref(), &opts)?;
            SolutionFile::Timestep { total_u: s.total_u(), solution: s }
        }
        SolveAlgo::PmcfDisjoint | SolveAlgo::PmcfEnum => {
            if coms.is_some() {
                bail!("path formulations route between every node pair; host-augmented graphs need link or decomp");
            }
            let (name, set) = if a.algo == SolveAlgo::PmcfDisjoint {
                ("pmcf-disjoint", routes::disjoint_paths(&g)?)
            } else {
                let (set, dropped) = routes::enum_paths_bounded(&g, lmax()?, None)?;
                if dropped > 0 {
                    log::warn!("path enumeration truncated {dropped} commodities");
                }
                ("pmcf-enum", set)
            };
            let (f, routes) = mcf_path(&g, &set, &opts)?;
            SolutionFile::Path { algo: name.into(), f, routes }
        }
    };
    ctx.emit(&a.out, &pretty(&file)?)
}

fn cmd_routes(ctx: &mut Ctx, a: &RoutesArgs) -> anyhow::Result<()> {
    let g = ctx.graph(&a.graph)?;
    let seed = ctx.substream("routes");
    let set = match a.algo {
        RoutesAlgo::Sssp => routes::sssp_routes(&g, seed)?.to_pathset(),
        RoutesAlgo::LoadAwareSp => routes::load_aware_sp(&g, seed)?.to_pathset(),
        RoutesAlgo::Ewsp => routes::ewsp_routes(&g)?,
        RoutesAlgo::Dor => {
            let dims: Vec<usize> = g
                .meta()
                .params
                .get("dims")
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .ok_or_else(|| anyhow!("dor needs a torus graph generated with dims"))?;
            routes::dor_routes(&g, &dims)?.to_pathset()
        }
        RoutesAlgo::Disjoint => routes::disjoint_paths(&g)?,
        RoutesAlgo::Enum => {
            let l = a.lmax.unwrap_or(graph::diameter(&g)? as usize);
            routes::enum_paths_bounded(&g, l, None)?.0
        }
        RoutesAlgo::Extract => {
            let sol = a.sol.as_ref().ok_or_else(|| usage("extract needs --sol"))?;
            match ctx.json::<SolutionFile>(sol)? {
                SolutionFile::Link { solution, .. } => routes::extract_widest_paths(&g, &solution)?,
                SolutionFile::Path { routes, .. } => routes,
                _ => bail!("extract needs a link or decomp solution"),
            }
        }
        RoutesAlgo::Ilp => {
            let r = routes::ilp_min_congestion(&g, &routes::disjoint_paths(&g)?, a.alpha, &ctx.ilp())?;
            if !r.complete {
                log::warn!("search stopped early; max load {} against bound {}", r.max_load, r.bound);
            }
            r.table.to_pathset()
        }
    };
    ctx.emit(&a.out, &pretty(&set)?)
}

#[derive(Serialize)]
struct BoundOutput {
    #[serde(flatten)]
    report: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_distance_bound: Option<f64>,
}

fn cmd_bound(ctx: &mut Ctx, a: &BoundArgs) -> anyhow::Result<()> {
    let (mut n, mut d, mut dist) = (a.n, a.d, None);
    if let Some(p) = &a.graph {
        let g = ctx.graph(p)?;
        n = n.or(Some(g.n()));
        d = d.or(g.regular_degree());
        dist = Some(graph_distance_bound(&g)?);
    }
    let (n, d) = match (n, d) {
        (Some(n), Some(d)) => (n, d),
        _ => return Err(usage("bound needs --n and --d, or a graph of uniform out-degree")),
    };
    let out = BoundOutput { report: BoundReport::new(d, n)?, graph_distance_bound: dist };
    ctx.emit(&a.out, &pretty(&out)?)
}

fn cmd_compile(ctx: &mut Ctx, a: &CompileArgs) -> anyhow::Result<()> {
    let g = ctx.graph(&a.graph)?;
    let q_max = a.q_max.unwrap_or(ctx.q_max);
    let sched = match a.mode {
        CompileMode::Ts => match ctx.json::<SolutionFile>(&a.sol)? {
            SolutionFile::Timestep { solution, .. } => schedc::compile_timestep_schedule(&g, &solution, q_max, a.m)?,
            _ => bail!("--mode ts needs a solution from `solve --algo ts`"),
        },
        CompileMode::Path => {
            let set: WeightedPathSet = match ctx.json::<serde_json::Value>(&a.sol)? {
                v if v.get("kind").is_some() => match serde_json::from_value::<SolutionFile>(v)? {
                    SolutionFile::Path { routes, .. } => routes,
                    _ => bail!("--mode path needs a route file or a path solution"),
                },
                v => serde_json::from_value(v)?,
            };
            let (table, sched) = schedc::compile_path_schedule(&g, &set, a.m, q_max)?;
            ctx.write(&a.out, &schedc::emit_schedule_xml(&sched))?;
            let mut name = a.out.as_os_str().to_owned();
            name.push(".routes.json");
            return ctx.write(Path::new(&name), &pretty(&table)?);
        }
    };
    ctx.write(&a.out, &schedc::emit_schedule_xml(&sched))
}

#[derive(Serialize)]
struct LayersOutput {
    layers: usize,
    acyclic: bool,
    /// Route id `s->d#k` (k-th path of the commodity) to layer.
    assignment: std::collections::BTreeMap<String, usize>,
}

fn cmd_layers(ctx: &mut Ctx, a: &LayersArgs) -> anyhow::Result<()> {
    let g = ctx.graph(&a.graph)?;
    let set: WeightedPathSet = ctx.json(&a.routes)?;
    set.validate(&g)?;
    let mut ids = Vec::new();
    let mut paths = Vec::new();
    for e in &set.entries {
        for (k, p) in e.paths.iter().enumerate() {
            ids.push(format!("{}->{}#{k}", e.src, e.dst));
            paths.push(p.nodes.clone());
        }
    }
    let assignment = lash_sequential(&g, &paths, a.max_layers)?;
    let verdict = verify_layers(&g, &paths, &assignment)?;
    if let LayerVerdict::Cycle { layer, links } = &verdict {
        bail!("layer {layer} has a dependency cycle over links {links:?}");
    }
    let out = LayersOutput {
        layers: assignment.count,
        acyclic: verdict.is_acyclic(),
        assignment: ids.into_iter().zip(assignment.layers).collect(),
    };
    ctx.emit(&a.out, &pretty(&out)?)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum EvalOutput {
    Replay { time: f64, step_times: Vec<f64>, shards: usize, nsteps: usize, chunks: u64 },
    Fluid { time: f64, max_load: f64, throughput: f64 },
    Algorithm(simkit::EvalReport),
}

fn cmd_eval(ctx: &mut Ctx, a: &EvalArgs) -> anyhow::Result<()> {
    let g = ctx.graph(&a.graph)?;
    let fluid = |set: &WeightedPathSet| -> anyhow::Result<EvalOutput> {
        let time = simkit::eval_path_alltoall(&g, set, a.m, a.b)?;
        let n = set.commodities().iter().flat_map(|c| [c.src, c.dst]).max().map_or(0, |v| v + 1).min(g.n());
        Ok(EvalOutput::Fluid { time, max_load: time * a.b / a.m, throughput: (n.max(1) - 1) as f64 * a.m / time })
    };
    let out = match (&a.schedule, &a.routes, &a.algo) {
        (Some(s), routes, None) => {
            ctx.inputs.push(s.clone());
            let sched = schedc::read_schedule_xml(s)?;
            match sched.mode {
                ScheduleMode::Link => {
                    let r = simkit::replay_timestep_schedule(&g, &sched, a.m, a.b, a.sync)?;
                    EvalOutput::Replay {
                        time: r.time,
                        step_times: r.step_times,
                        shards: r.shards,
                        nsteps: sched.nsteps,
                        chunks: sched.chunks,
                    }
                }
                ScheduleMode::Path => {
                    let p = routes.as_ref().ok_or_else(|| anyhow!("a path schedule needs --routes"))?;
                    let table: WeightedPathSet = ctx.json(p)?;
                    fluid(&simkit::realized_pathset(&table, &sched)?)?
                }
            }
        }
        (None, Some(p), None) => {
            let set: WeightedPathSet = ctx.json(p)?;
            fluid(&set)?
        }
        (None, None, Some(algo)) => {
            let algo: Algorithm = algo.parse()?;
            let opts = StudyOptions {
                mcf: ctx.mcf(),
                ilp: ctx.ilp(),
                seed: ctx.substream("routes"),
                m: a.m,
                b: a.b,
                timeout: None,
            };
            EvalOutput::Algorithm(simkit::evaluate(&g, &a.graph.display().to_string(), algo, &opts)?)
        }
        _ => return Err(usage("eval takes exactly one of --schedule [--routes], --routes or --algo")),
    };
    ctx.emit(&a.out, &pretty(&out)?)
}

fn rows_text<T: Serialize>(rows: &[T], format: Format) -> anyhow::Result<String> {
    let values: Vec<serde_json::Value> = rows.iter().map(serde_json::to_value).collect::<Result<_, _>>()?;
    match format {
        Format::Json => Ok(values.iter().map(|v| v.to_string() + "\n").collect()),
        Format::Csv => {
            let flat: Vec<Vec<(String, String)>> = values.iter().map(|v| flatten("", v)).collect();
            let mut header: Vec<String> = Vec::new();
            for row in &flat {
                for (k, _) in row {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
            let mut out = header.join(",") + "\n";
            for row in &flat {
                let cells: Vec<String> = header
                    .iter()
                    .map(|h| row.iter().find(|(k, _)| k == h).map(|(_, v)| csv_cell(v)).unwrap_or_default())
                    .collect();
                out += &(cells.join(",") + "\n");
            }
            Ok(out)
        }
    }
}

fn flatten(prefix: &str, v: &serde_json::Value) -> Vec<(String, String)> {
    match v {
        serde_json::Value::Object(m) => m
            .iter()
            .flat_map(|(k, v)| flatten(&if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") }, v))
            .collect(),
        serde_json::Value::Null => vec![(prefix.to_string(), String::new())],
        serde_json::Value::String(s) => vec![(prefix.to_string(), s.clone())],
        other => vec![(prefix.to_string(), other.to_string())],
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_compare(ctx: &mut Ctx, a: &CompareArgs) -> anyhow::Result<()> {
    let specs: Vec<TopologySpec> = a.topos.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let opts = StudyOptions { mcf: ctx.mcf(), ilp: ctx.ilp(), seed: ctx.substream("routes"), m: a.m, b: a.b, timeout: None };
    let rows = simkit::compare_topologies(&specs, a.algo.parse()?, &opts);
    for r in rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("{}: {}", r.topology, r.error.as_deref().unwrap_or_default());
    }
    ctx.emit(&a.out, &rows_text(&rows, a.format)?)
}

fn cmd_bench(ctx: &mut Ctx, a: &BenchArgs) -> anyhow::Result<()> {
    let algos: Vec<Algorithm> = a.algos.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let opts = StudyOptions {
        mcf: ctx.mcf(),
        ilp: ctx.ilp(),
        seed: ctx.substream("routes"),
        timeout: a.timeout.map(Duration::from_secs_f64),
        ..Default::default()
    };
    let rows = simkit::bench_runtimes(&a.ns, a.d, &algos, &opts);
    ctx.emit(&a.out, &rows_text(&rows, a.format)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let solver_text = cli.solver.clone().or(file.solver).unwrap_or_else(|| "reference".into());
    let kind: SolverKind = solver_text.parse().map_err(|e| anyhow!("--solver: {e}"))?;
    let solver = Solver::from_kind(&kind)?;
    let mut ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        workers: cli.workers.or(file.workers).unwrap_or(0),
        solver_name: solver.name(),
        solver,
        q_max: file.q_max.unwrap_or(DEFAULT_Q_MAX),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let started = Instant::now();
    let name = match &cli.command {
        Command::Gen(a) => cmd_gen(&mut ctx, a).map(|_| "gen"),
        Command::Solve(a) => cmd_solve(&mut ctx, a).map(|_| "solve"),
        Command::Routes(a) => cmd_routes(&mut ctx, a).map(|_| "routes"),
        Command::Bound(a) => cmd_bound(&mut ctx, a).map(|_| "bound"),
        Command::Compile(a) => cmd_compile(&mut ctx, a).map(|_| "compile"),
        Command::Layers(a) => cmd_layers(&mut ctx, a).map(|_| "layers"),
        Command::Eval(a) => cmd_eval(&mut ctx, a).map(|_| "eval"),
        Command::Compare(a) => cmd_compare(&mut ctx, a).map(|_| "compare"),
        Command::Bench(a) => cmd_bench(&mut ctx, a).map(|_| "bench"),
    }?;
    if let Some(first) = ctx.outputs.first().cloned() {
        let digests = |ps: &[PathBuf]| ps.iter().map(|p| FileDigest::of(p)).collect::<std::io::Result<Vec<_>>>();
        let manifest = RunManifest {
            command: name.into(),
            argv: std::env::args().collect(),
            seed: ctx.seed,
            workers: ctx.workers,
            solver: ctx.solver_name.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            inputs: digests(&ctx.inputs)?,
            outputs: digests(&ctx.outputs)?,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        manifest.write_beside(&first)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().next().is_some_and(|c| c.to_string() == "usage") {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
