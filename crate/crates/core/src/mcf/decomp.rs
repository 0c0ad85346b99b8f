//! Source-grouped master LP plus one child LP per source.
//!
//! The master aggregates all commodities sharing a source into one flow, which
//! shrinks the model by a factor of N and already yields the optimal `F`. Each
//! child then splits its source's aggregate flow into per-destination flows,
//! minimizing total flow so no gratuitous cycles appear. Children are
//! independent and run on a worker pool.

use a2a_lp::{LpModel, Relation, Sense, Var};
use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{all_to_all, by_source, post, solve_checked, validate_commodities, Commodity, LinkFlowSolution, McfOptions};
use crate::error::{Error, Result};
use crate::graph::Digraph;

/// Master LP result: `F` and the aggregate flow leaving each source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceFlowSolution {
    pub f: f64,
    pub commodities: Vec<Commodity>,
    /// Sources in ascending order, parallel to `flows`.
    pub sources: Vec<usize>,
    /// `(edge id, rate)` per source, sorted by edge id.
    pub flows: Vec<Vec<(usize, f64)>>,
}

impl SourceFlowSolution {
    /// Largest violation of capacity and source-grouped conservation.
    pub fn max_violation(&self, g: &Digraph) -> f64 {
        let mut worst: f64 = 0.0;
        let mut load = vec![0.0; g.num_edges()];
        for (i, &s) in self.sources.iter().enumerate() {
            let mut net = vec![0.0; g.n()];
            for &(e, x) in &self.flows[i] {
                load[e] += x;
                net[g.edge(e).dst] += x;
                net[g.edge(e).src] -= x;
                worst = worst.max(-x);
            }
            for c in self.commodities.iter().filter(|c| c.src == s) {
                net[c.dst] -= self.f * c.demand;
            }
            for (u, &v) in net.iter().enumerate() {
                if u != s {
                    worst = worst.max(-v);
                }
            }
        }
        for (e, l) in load.into_iter().enumerate() {
            worst = worst.max(l - g.edge(e).cap);
        }
        worst
    }
}

fn commodities_or_all(g: &Digraph, commodities: Option<&[Commodity]>) -> Vec<Commodity> {
    commodities.map_or_else(|| all_to_all(g.n()), <[Commodity]>::to_vec)
}

/// Solves only the source-grouped master LP.
pub fn mcf_master(g: &Digraph, commodities: Option<&[Commodity]>, opts: &McfOptions) -> Result<SourceFlowSolution> {
    let commodities = commodities_or_all(g, commodities);
    validate_commodities(g, &commodities)?;
    let groups = by_source(&commodities);

    let mut lp = LpModel::new(Sense::Maximize);
    let f = lp.add_var(0.0, f64::INFINITY, 1.0);
    let mut cap_rows: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.num_edges()];
    let mut node_terms: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.n()];
    let mut vars = Vec::with_capacity(groups.len());
    for (s, ks) in &groups {
        let s = *s;
        let mut mine = Vec::new();
        for (e, edge) in g.edges().iter().enumerate() {
            if edge.src == edge.dst || edge.dst == s {
                continue;
            }
            let x = lp.add_var(0.0, f64::INFINITY, 0.0);
            mine.push((e, x));
            cap_rows[e].push((x, 1.0));
            node_terms[edge.src].push((x, 1.0));
            node_terms[edge.dst].push((x, -1.0));
        }
        for &k in ks {
            node_terms[commodities[k].dst].push((f, commodities[k].demand));
        }
        for (u, terms) in node_terms.iter_mut().enumerate() {
            let row = std::mem::take(terms);
            if u != s && !row.is_empty() {
                lp.add_row(row, Relation::Le, 0.0);
            }
        }
        vars.push(mine);
    }
    for (e, row) in cap_rows.into_iter().enumerate() {
        if !row.is_empty() {
            lp.add_row(row, Relation::Le, g.edge(e).cap);
        }
    }
    debug!("master LP: {} vars, {} rows", lp.num_vars(), lp.num_rows());
    let sol = solve_checked(&opts.solver, &lp, &opts.lp, "master LP")?;
    let flows = vars
        .iter()
        .map(|mine| {
            mine.iter()
                .map(|&(e, x)| (e, sol.primal[x.0]))
                .filter(|&(_, v)| v > 1e-12)
                .collect()
        })
        .collect();
    Ok(SourceFlowSolution {
        f: sol.primal[f.0],
        commodities,
        sources: groups.iter().map(|g| g.0).collect(),
        flows,
    })
}

fn child_model(g: &Digraph, s: usize, dests: &[Commodity], agg: &[(usize, f64)], f: f64, slack: f64) -> (LpModel, Vec<Vec<(usize, Var)>>) {
    let mut lp = LpModel::new(Sense::Minimize);
    let mut cap_rows: Vec<Vec<(Var, f64)>> = vec![Vec::new(); agg.len()];
    let mut node_terms: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.n()];
    let mut vars = Vec::with_capacity(dests.len());
    for c in dests {
        let mut mine = Vec::new();
        for (i, &(e, _)) in agg.iter().enumerate() {
            let edge = g.edge(e);
            if edge.src == c.dst {
                continue;
            }
            let x = lp.add_var(0.0, f64::INFINITY, 1.0);
            mine.push((e, x));
            cap_rows[i].push((x, 1.0));
            node_terms[edge.src].push((x, 1.0));
            node_terms[edge.dst].push((x, -1.0));
        }
        for (u, terms) in node_terms.iter_mut().enumerate() {
            let row = std::mem::take(terms);
            if u == s || row.is_empty() {
                continue;
            }
            let rhs = if u == c.dst { -f * c.demand * (1.0 - slack) } else { 0.0 };
            lp.add_row(row, Relation::Le, rhs);
        }
        vars.push(mine);
    }
    for (i, row) in cap_rows.into_iter().enumerate() {
        if !row.is_empty() {
            lp.add_row(row, Relation::Le, agg[i].1);
        }
    }
    (lp, vars)
}

fn solve_child(g: &Digraph, master: &SourceFlowSolution, i: usize, opts: &McfOptions) -> Result<Vec<Vec<(usize, f64)>>> {
    let s = master.sources[i];
    let dests: Vec<Commodity> = master.commodities.iter().filter(|c| c.src == s).copied().collect();
    let mut last_err = None;
    for slack in [1e-9, 1e-7] {
        let (lp, vars) = child_model(g, s, &dests, &master.flows[i], master.f, slack);
        match solve_checked(&opts.solver, &lp, &opts.lp, &format!("child LP for source {s}")) {
            Ok(sol) => {
                return dests
                    .iter()
                    .zip(&vars)
                    .map(|(c, mine)| {
                        let raw: Vec<(usize, f64)> = mine.iter().map(|&(e, x)| (e, sol.primal[x.0])).collect();
                        post::conservative_flows(g, c.src, c.dst, &raw, master.f * c.demand)
                    })
                    .collect();
            }
            Err(e) => {
                let path = std::env::temp_dir().join(format!("a2a-child-{s}.lp"));
                let dumped = std::fs::write(&path, lp.dump()).is_ok();
                last_err = Some(Error::Infeasible(format!(
                    "child LP for source {s} failed although the master guarantees feasibility: {e}{}",
                    if dumped { format!(" (model written to {})", path.display()) } else { String::new() }
                )));
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Master LP, then per-source child LPs on `opts.workers` threads.
///
/// The result is independent of the worker count: children are merged in
/// source order.
pub fn mcf_decomposed(g: &Digraph, commodities: Option<&[Commodity]>, opts: &McfOptions) -> Result<LinkFlowSolution> {
    let master = mcf_master(g, commodities, opts)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.thread_count())
        .build()
        .map_err(|e| Error::Construction(format!("worker pool: {e}")))?;
    let per_source: Vec<Result<Vec<Vec<(usize, f64)>>>> = pool.install(|| {
        (0..master.sources.len())
            .into_par_iter()
            .map(|i| solve_child(g, &master, i, opts))
            .collect()
    });

    let mut flows = vec![Vec::new(); master.commodities.len()];
    for (i, res) in per_source.into_iter().enumerate() {
        let s = master.sources[i];
        let ks = master.commodities.iter().enumerate().filter(|(_, c)| c.src == s).map(|(k, _)| k);
        for (k, fl) in ks.zip(res?) {
            flows[k] = fl;
        }
    }
    Ok(LinkFlowSolution { f: master.f, commodities: master.commodities, flows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;
    use crate::mcf::mcf_link;

    #[test]
    fn matches_link_on_small_graphs() {
        for g in [
            gen::gen_torus(&[3], false).unwrap(),
            gen::gen_hypercube(3).unwrap(),
            gen::gen_kautz(6, 2).unwrap(),
        ] {
            let opts = McfOptions::default();
            let a = mcf_link(&g, None, &opts).unwrap();
            let b = mcf_decomposed(&g, None, &opts).unwrap();
            assert!((a.f - b.f).abs() < 1e-9);
            assert!(b.check(&g).within(1e-7), "{:?}", b.check(&g));
        }
    }

    #[test]
    fn worker_count_does_not_change_the_answer() {
        let g = gen::gen_kautz(8, 2).unwrap();
        let one = mcf_decomposed(&g, None, &McfOptions { workers: 1, ..Default::default() }).unwrap();
        let many = mcf_decomposed(&g, None, &McfOptions { workers: 4, ..Default::default() }).unwrap();
        assert_eq!(one, many);
    }
}
