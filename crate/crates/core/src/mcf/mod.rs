//! Maximum concurrent multi-commodity flow in four formulations.
//!
//! All models are assembled directly as sparse rows. Per-commodity flow is
//! never placed on links entering the commodity's source or leaving its
//! destination, and self-loops carry no variables.

mod decomp;
mod link;
mod path;
mod post;
mod timestep;

use std::collections::VecDeque;

use a2a_lp::{LpModel, LpSolution, LpStatus, SolveOptions, Solver};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Digraph;

pub use decomp::{mcf_decomposed, mcf_master, SourceFlowSolution};
pub use link::mcf_link;
pub use path::mcf_path;
pub use post::{cancel_cycles, conservative_flows};
pub use timestep::{mcf_timestepped, TimeExpandedSolution};

/// One ordered `(src, dst)` demand of relative size `demand`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    pub src: usize,
    pub dst: usize,
    pub demand: f64,
}

impl Commodity {
    pub fn new(src: usize, dst: usize) -> Self {
        Commodity { src, dst, demand: 1.0 }
    }
}

/// Every ordered pair of distinct nodes, source-major.
pub fn all_to_all(n: usize) -> Vec<Commodity> {
    all_to_all_among(&(0..n).collect::<Vec<_>>())
}

/// Every ordered pair of distinct members of `nodes`.
pub fn all_to_all_among(nodes: &[usize]) -> Vec<Commodity> {
    nodes
        .iter()
        .flat_map(|&s| nodes.iter().filter(move |&&d| d != s).map(move |&d| Commodity::new(s, d)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct McfOptions {
    pub solver: Solver,
    pub lp: SolveOptions,
    /// Worker threads for child LPs; 0 means all available cores.
    pub workers: usize,
    /// Lifts the size guards.
    pub force: bool,
}

impl Default for McfOptions {
    fn default() -> Self {
        McfOptions { solver: Solver::Reference, lp: SolveOptions::default(), workers: 0, force: false }
    }
}

impl McfOptions {
    pub fn with_solver(solver: Solver) -> Self {
        McfOptions { solver, ..Default::default() }
    }

    pub(crate) fn thread_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

/// Concurrent rate `f` and per-commodity link flows.
///
/// `flows[k]` lists `(edge id, rate)` for commodity `k`, sorted by edge id,
/// zero rates omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkFlowSolution {
    pub f: f64,
    pub commodities: Vec<Commodity>,
    pub flows: Vec<Vec<(usize, f64)>>,
}

/// Worst violations of a [`LinkFlowSolution`]'s invariants.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowCheck {
    pub capacity_excess: f64,
    pub conservation_error: f64,
    /// Largest shortfall of delivered flow below `f * demand`.
    pub demand_shortfall: f64,
    pub negative: f64,
}

impl FlowCheck {
    pub fn within(&self, tol: f64) -> bool {
        self.capacity_excess <= tol
            && self.conservation_error <= tol
            && self.demand_shortfall <= tol
            && self.negative <= tol
    }
}

impl LinkFlowSolution {
    /// Net inflow at each node for commodity `k`.
    pub fn net_inflow(&self, g: &Digraph, k: usize) -> Vec<f64> {
        let mut net = vec![0.0; g.n()];
        for &(e, x) in &self.flows[k] {
            let edge = g.edge(e);
            net[edge.dst] += x;
            net[edge.src] -= x;
        }
        net
    }

    /// Flow delivered into commodity `k`'s destination.
    pub fn delivered(&self, g: &Digraph, k: usize) -> f64 {
        self.net_inflow(g, k)[self.commodities[k].dst]
    }

    /// Total flow on every edge.
    pub fn edge_loads(&self, g: &Digraph) -> Vec<f64> {
        let mut load = vec![0.0; g.num_edges()];
        for fl in &self.flows {
            for &(e, x) in fl {
                load[e] += x;
            }
        }
        load
    }

    pub fn check(&self, g: &Digraph) -> FlowCheck {
        let mut c = FlowCheck::default();
        for (e, &l) in self.edge_loads(g).iter().enumerate() {
            c.capacity_excess = c.capacity_excess.max(l - g.edge(e).cap);
        }
        for (k, com) in self.commodities.iter().enumerate() {
            for &(_, x) in &self.flows[k] {
                c.negative = c.negative.max(-x);
            }
            let net = self.net_inflow(g, k);
            for (u, &v) in net.iter().enumerate() {
                if u != com.src && u != com.dst {
                    c.conservation_error = c.conservation_error.max(v.abs());
                }
            }
            c.demand_shortfall = c.demand_shortfall.max(self.f * com.demand - net[com.dst]);
        }
        c
    }
}

pub(crate) fn validate_commodities(g: &Digraph, commodities: &[Commodity]) -> Result<()> {
    if commodities.is_empty() {
        return Err(invalid("no commodities (a graph needs at least two nodes)"));
    }
    for c in commodities {
        if c.src >= g.n() || c.dst >= g.n() || c.src == c.dst {
            return Err(invalid(format!("bad commodity ({}, {}) for n={}", c.src, c.dst, g.n())));
        }
        if !(c.demand > 0.0 && c.demand.is_finite()) {
            return Err(invalid(format!("commodity ({}, {}) has demand {}", c.src, c.dst, c.demand)));
        }
    }
    // every destination must be reachable from its source
    let mut sources: Vec<usize> = commodities.iter().map(|c| c.src).collect();
    sources.sort_unstable();
    sources.dedup();
    for s in sources {
        let mut seen = vec![false; g.n()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for e in g.out_edges(u) {
                if !seen[e.dst] {
                    seen[e.dst] = true;
                    queue.push_back(e.dst);
                }
            }
        }
        if let Some(c) = commodities.iter().find(|c| c.src == s && !seen[c.dst]) {
            return Err(Error::Disconnected { from: s, to: c.dst });
        }
    }
    Ok(())
}

pub(crate) fn solve_checked(solver: &Solver, model: &LpModel, opts: &SolveOptions, what: &str) -> Result<LpSolution> {
    let sol = solver.solve(model, opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solve {
            what: what.into(),
            status: sol.status,
            detail: if sol.diagnostics.is_empty() { String::new() } else { format!(" ({})", sol.diagnostics) },
        });
    }
    Ok(sol)
}

/// Commodity indices grouped by source, sources ascending.
pub(crate) fn by_source(commodities: &[Commodity]) -> Vec<(usize, Vec<usize>)> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (k, c) in commodities.iter().enumerate() {
        groups.entry(c.src).or_default().push(k);
    }
    groups.into_iter().collect()
}
