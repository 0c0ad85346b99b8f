use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use a2a_lp::IlpOptions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{alltoall_time_lower_bound, graph_distance_bound};
use crate::error::{invalid, Error, Result};
use crate::graph::{gen, Digraph};
use crate::mcf::{mcf_decomposed, mcf_link, mcf_master, mcf_path, McfOptions};
use crate::routes::{
    disjoint_paths, dor_routes, eval_link_load, ewsp_routes, ilp_min_congestion, load_aware_sp, sssp_routes,
};

/// A reproducible graph construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topo", rename_all = "lowercase")]
pub enum TopologySpec {
    Kautz { n: usize, d: usize },
    DeBruijn { n: usize, d: usize },
    Torus { dims: Vec<usize> },
    Ring { n: usize },
    Hypercube { k: usize },
    Twisted { k: usize },
    Bipartite { n: usize },
    Complete { n: usize },
    Random { n: usize, d: usize, seed: u64 },
    Expander { n: usize, d: usize, seed: u64 },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Digraph> {
        match self {
            TopologySpec::Kautz { n, d } => gen::gen_kautz(*n, *d),
            TopologySpec::DeBruijn { n, d } => gen::gen_de_bruijn(*n, *d),
            TopologySpec::Torus { dims } => gen::gen_torus(dims, true),
            TopologySpec::Ring { n } => gen::gen_torus(&[*n], false),
            TopologySpec::Hypercube { k } => gen::gen_hypercube(*k),
            TopologySpec::Twisted { k } => gen::gen_twisted_hypercube(*k),
            TopologySpec::Bipartite { n } => gen::gen_complete_bipartite(*n),
            TopologySpec::Complete { n } => gen::gen_complete(*n),
            TopologySpec::Random { n, d, seed } => gen::gen_random_regular(*n, *d, *seed),
            TopologySpec::Expander { n, d, seed } => gen::gen_shortest_path_expander(*n, *d, *seed, 1e-3),
        }
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Kautz { n, d } => write!(f, "kautz:n={n},d={d}"),
            TopologySpec::DeBruijn { n, d } => write!(f, "debruijn:n={n},d={d}"),
            TopologySpec::Torus { dims } => {
                let s: Vec<String> = dims.iter().map(|k| k.to_string()).collect();
                write!(f, "torus:dims={}", s.join("x"))
            }
            TopologySpec::Ring { n } => write!(f, "ring:n={n}"),
            TopologySpec::Hypercube { k } => write!(f, "hypercube:k={k}"),
            TopologySpec::Twisted { k } => write!(f, "twisted:k={k}"),
            TopologySpec::Bipartite { n } => write!(f, "bipartite:n={n}"),
            TopologySpec::Complete { n } => write!(f, "complete:n={n}"),
            TopologySpec::Random { n, d, seed } => write!(f, "random:n={n},d={d},seed={seed}"),
            TopologySpec::Expander { n, d, seed } => write!(f, "expander:n={n},d={d},seed={seed}"),
        }
    }
}

/// `name:key=value,...`, as printed by `Display`; torus dims are `AxBxC`.
impl FromStr for TopologySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::HashMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| invalid(format!("expected key=value in {s:?}, got {part:?}")))?;
            kv.insert(k.trim(), v.trim());
        }
        let num = |k: &str| -> Result<u64> {
            let v = kv.get(k).ok_or_else(|| invalid(format!("{name} needs {k}=")))?;
            v.parse().map_err(|_| invalid(format!("{k}={v} is not a non-negative integer")))
        };
        let size = |k: &str| num(k).map(|v| v as usize);
        let seed = || if kv.contains_key("seed") { num("seed") } else { Ok(0) };
        Ok(match name {
            "kautz" | "genkautz" => TopologySpec::Kautz { n: size("n")?, d: size("d")? },
            "debruijn" => TopologySpec::DeBruijn { n: size("n")?, d: size("d")? },
            "torus" => {
                let dims = kv.get("dims").ok_or_else(|| invalid("torus needs dims="))?;
                let dims = dims
                    .split(['x', ';'])
                    .map(|k| k.parse().map_err(|_| invalid(format!("bad torus extent {k:?}"))))
                    .collect::<Result<Vec<usize>>>()?;
                TopologySpec::Torus { dims }
            }
            "ring" => TopologySpec::Ring { n: size("n")? },
            "hypercube" => TopologySpec::Hypercube { k: size("k")? },
            "twisted" => TopologySpec::Twisted { k: size("k")? },
            "bipartite" => TopologySpec::Bipartite { n: size("n")? },
            "complete" => TopologySpec::Complete { n: size("n")? },
            "random" => TopologySpec::Random { n: size("n")?, d: size("d")?, seed: seed()? },
            "expander" => TopologySpec::Expander { n: size("n")?, d: size("d")?, seed: seed()? },
            other => return Err(invalid(format!("unknown topology {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Link-based MCF.
    Link,
    /// Decomposed MCF with flows.
    Decomp,
    /// The decomposition's master LP only: the flow value without flows.
    Master,
    /// Path MCF over link-disjoint paths.
    PmcfDisjoint,
    Sssp,
    LoadAwareSp,
    Ewsp,
    Dor,
    /// Minimum-congestion single path per commodity over link-disjoint paths.
    Ilp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Link,
        Algorithm::Decomp,
        Algorithm::Master,
        Algorithm::PmcfDisjoint,
        Algorithm::Sssp,
        Algorithm::LoadAwareSp,
        Algorithm::Ewsp,
        Algorithm::Dor,
        Algorithm::Ilp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Link => "link",
            Algorithm::Decomp => "decomp",
            Algorithm::Master => "master",
            Algorithm::PmcfDisjoint => "pmcf-disjoint",
            Algorithm::Sssp => "sssp",
            Algorithm::LoadAwareSp => "load-aware-sp",
            Algorithm::Ewsp => "ewsp",
            Algorithm::Dor => "dor",
            Algorithm::Ilp => "ilp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                invalid(format!("unknown algorithm {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub mcf: McfOptions,
    pub ilp: IlpOptions,
    /// Seed for randomized baselines.
    pub seed: u64,
    /// Shard bytes and per-unit-capacity link bandwidth.
    pub m: f64,
    pub b: f64,
    pub timeout: Option<Duration>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions { mcf: McfOptions::default(), ilp: IlpOptions::default(), seed: 0, m: 1.0, b: 1.0, timeout: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub graph: String,
    pub n: usize,
    pub algorithm: Algorithm,
    pub f: f64,
    /// Maximum normalized link load, `1 / f`.
    pub max_load: f64,
    /// `max_load * m / b`.
    pub alltoall_time: f64,
    /// `(n - 1) * m / alltoall_time`.
    pub throughput: f64,
    /// Best available lower bound on `max_load`.
    pub time_lb: f64,
    pub bound_ratio: f64,
    pub runtime_s: f64,
}

/// Larger of the graph distance bound and, for unit-capacity graphs of
/// uniform out-degree, the tree bound.
pub(crate) fn best_lower_bound(g: &Digraph) -> Result<f64> {
    let mut lb = graph_distance_bound(g)?;
    if let Some(d) = g.regular_degree().filter(|_| g.edges().iter().all(|e| e.cap == 1.0)) {
        if g.n() >= 2 {
            lb = lb.max(alltoall_time_lower_bound(d, g.n())?);
        }
    }
    Ok(lb)
}

fn torus_dims(g: &Digraph) -> Result<Vec<usize>> {
    let meta = g.meta();
    let dims = (meta.generator == "torus" && meta.params.get("bidirectional") == Some(&serde_json::Value::Bool(true)))
        .then(|| meta.params.get("dims"))
        .flatten()
        .and_then(|v| serde_json::from_value::<Vec<usize>>(v.clone()).ok());
    dims.ok_or_else(|| invalid("dimension-ordered routing needs a bidirectional torus"))
}

/// Maximum normalized link load under `algo`.
fn max_load(g: &Digraph, algo: Algorithm, opts: &StudyOptions) -> Result<f64> {
    Ok(match algo {
        Algorithm::Link => 1.0 / mcf_link(g, None, &opts.mcf)?.f,
        Algorithm::Decomp => 1.0 / mcf_decomposed(g, None, &opts.mcf)?.f,
        Algorithm::Master => 1.0 / mcf_master(g, None, &opts.mcf)?.f,
        Algorithm::PmcfDisjoint => 1.0 / mcf_path(g, &disjoint_paths(g)?, &opts.mcf)?.0,
        Algorithm::Sssp => eval_link_load(g, &sssp_routes(g, opts.seed)?.to_pathset())?.max_load,
        Algorithm::LoadAwareSp => eval_link_load(g, &load_aware_sp(g, opts.seed)?.to_pathset())?.max_load,
        Algorithm::Ewsp => eval_link_load(g, &ewsp_routes(g)?)?.max_load,
        Algorithm::Dor => eval_link_load(g, &dor_routes(g, &torus_dims(g)?)?.to_pathset())?.max_load,
        Algorithm::Ilp => {
            let mut ilp = opts.ilp.clone();
            ilp.time_limit = ilp.time_limit.or(opts.timeout);
            ilp_min_congestion(g, &disjoint_paths(g)?, 0.0, &ilp)?.max_load
        }
    })
}

pub fn evaluate(g: &Digraph, label: &str, algo: Algorithm, opts: &StudyOptions) -> Result<EvalReport> {
    let started = Instant::now();
    let load = max_load(g, algo, opts)?;
    let runtime_s = started.elapsed().as_secs_f64();
    let time_lb = best_lower_bound(g)?;
    let alltoall_time = load * opts.m / opts.b;
    Ok(EvalReport {
        graph: label.to_string(),
        n: g.n(),
        algorithm: algo,
        f: 1.0 / load,
        max_load: load,
        alltoall_time,
        throughput: (g.n() - 1) as f64 * opts.m / alltoall_time,
        time_lb,
        bound_ratio: load / time_lb,
        runtime_s,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub topology: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Evaluates every topology in parallel; failures are reported per row.
pub fn compare_topologies(specs: &[TopologySpec], algo: Algorithm, opts: &StudyOptions) -> Vec<CompareRow> {
    specs
        .par_iter()
        .map(|spec| {
            let label = spec.to_string();
            match spec.build().and_then(|g| evaluate(&g, &label, algo, opts)) {
                Ok(r) => CompareRow { topology: label, report: Some(r), error: None },
                Err(e) => CompareRow { topology: label, report: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub n: usize,
    pub d: usize,
    pub seconds: Option<f64>,
    pub timed_out: bool,
    pub max_load: Option<f64>,
    pub error: Option<String>,
}

/// Wall-clock of each algorithm on generalized Kautz graphs. With a
/// timeout, solvers get it as their own limit as well; a run still going
/// when it expires is recorded as timed out and left to finish detached.
pub fn bench_runtimes(ns: &[usize], d: usize, algos: &[Algorithm], opts: &StudyOptions) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &n in ns {
        for &algo in algos {
            let mut row = BenchRow { algorithm: algo, n, d, seconds: None, timed_out: false, max_load: None, error: None };
            let g = match gen::gen_kautz(n, d) {
                Ok(g) => g,
                Err(e) => {
                    row.error = Some(e.to_string());
                    rows.push(row);
                    continue;
                }
            };
            let mut o = opts.clone();
            o.mcf.force = true;
            o.mcf.lp.time_limit = o.mcf.lp.time_limit.or(opts.timeout);
            let (tx, rx) = mpsc::channel();
            let started = Instant::now();
            std::thread::spawn(move || {
                let _ = tx.send(max_load(&g, algo, &o));
            });
            let got = match opts.timeout {
                Some(t) => rx.recv_timeout(t).map_err(|_| ()),
                None => rx.recv().map_err(|_| ()),
            };
            match got {
                Ok(Ok(load)) => {
                    row.seconds = Some(started.elapsed().as_secs_f64());
                    row.max_load = Some(load);
                }
                Ok(Err(Error::Solve { status: a2a_lp::LpStatus::TimeLimit, .. })) => row.timed_out = true,
                Ok(Err(e)) => row.error = Some(e.to_string()),
                Err(()) => row.timed_out = true,
            }
            rows.push(row);
        }
    }
    rows
}
