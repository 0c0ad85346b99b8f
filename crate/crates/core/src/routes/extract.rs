use std::collections::BinaryHeap;

use log::warn;
use rayon::prelude::*;

use super::{CommodityPaths, WeightedPath, WeightedPathSet};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::mcf::{cancel_cycles, LinkFlowSolution};

const RESIDUAL_TOL: f64 = 1e-8;
const ZERO: f64 = 1e-15;

#[derive(PartialEq)]
struct Width(f64, usize);

impl Eq for Width {}
impl PartialOrd for Width {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Width {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Largest bottleneck of any `s -> d` path over links with positive residual.
fn widest_bottleneck(g: &Digraph, r: &[f64], s: usize, d: usize) -> f64 {
    let mut best = vec![0.0f64; g.n()];
    best[s] = f64::INFINITY;
    let mut heap = BinaryHeap::from([Width(f64::INFINITY, s)]);
    let mut done = vec![false; g.n()];
    while let Some(Width(w, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == d {
            return w;
        }
        for e in g.out_range(u) {
            if r[e] <= ZERO {
                continue;
            }
            let v = g.edge(e).dst;
            let nw = w.min(r[e]);
            if nw > best[v] {
                best[v] = nw;
                heap.push(Width(nw, v));
            }
        }
    }
    0.0
}

/// Lexicographically smallest `s -> d` path using only links with residual
/// at least `width`; the residual support must be acyclic.
fn smallest_path(g: &Digraph, r: &[f64], s: usize, d: usize, width: f64) -> Option<Vec<usize>> {
    let ok = |e: usize| r[e] >= width;
    let mut reaches = vec![false; g.n()];
    reaches[d] = true;
    let mut stack = vec![d];
    while let Some(v) = stack.pop() {
        for &e in g.in_edge_ids(v) {
            let u = g.edge(e).src;
            if ok(e) && !reaches[u] {
                reaches[u] = true;
                stack.push(u);
            }
        }
    }
    if !reaches[s] {
        return None;
    }
    let mut edges = Vec::new();
    let mut u = s;
    while u != d {
        let e = g.out_range(u).find(|&e| ok(e) && reaches[g.edge(e).dst] && g.edge(e).dst != u)?;
        edges.push(e);
        u = g.edge(e).dst;
        if edges.len() > g.n() {
            return None;
        }
    }
    Some(edges)
}

fn extract_one(g: &Digraph, s: usize, d: usize, flows: &[(usize, f64)]) -> (Vec<WeightedPath>, f64) {
    let mut r = vec![0.0; g.num_edges()];
    for (e, x) in cancel_cycles(g, flows) {
        r[e] = x;
    }
    let mut paths = Vec::new();
    for _ in 0..2 {
        loop {
            let w = widest_bottleneck(g, &r, s, d);
            if w <= ZERO {
                break;
            }
            let Some(edges) = smallest_path(g, &r, s, d, w) else { break };
            let mut nodes = vec![s];
            for &e in &edges {
                r[e] -= w;
                if r[e] <= ZERO {
                    r[e] = 0.0;
                }
                nodes.push(g.edge(e).dst);
            }
            paths.push(WeightedPath { nodes, weight: w });
        }
        let residual: f64 = r.iter().sum();
        if residual <= RESIDUAL_TOL {
            return (paths, residual);
        }
        warn!("commodity ({s},{d}): {residual:.3e} residual flow left; cancelling cycles and retrying");
        let left: Vec<(usize, f64)> = r.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(e, &x)| (e, x)).collect();
        r.iter_mut().for_each(|x| *x = 0.0);
        for (e, x) in cancel_cycles(g, &left) {
            r[e] = x;
        }
    }
    let residual = r.iter().sum();
    (paths, residual)
}

/// Decomposes each commodity's link flow into paths, repeatedly taking the
/// widest remaining path (ties: lexicographically smallest node sequence) and
/// subtracting its bottleneck.
///
/// Weights are rates in link-units, so each commodity's weights sum to its
/// delivered flow.
pub fn extract_widest_paths(g: &Digraph, sol: &LinkFlowSolution) -> Result<WeightedPathSet> {
    let results: Vec<(CommodityPaths, f64)> = sol
        .commodities
        .par_iter()
        .zip(&sol.flows)
        .map(|(c, fl)| {
            let (paths, residual) = extract_one(g, c.src, c.dst, fl);
            (CommodityPaths { src: c.src, dst: c.dst, demand: c.demand, paths }, residual)
        })
        .collect();
    let mut entries = Vec::with_capacity(results.len());
    for (entry, residual) in results {
        if residual > RESIDUAL_TOL {
            return Err(Error::Infeasible(format!(
                "extraction for ({}, {}) left {residual:.3e} of cyclic or unbalanced flow",
                entry.src, entry.dst
            )));
        }
        if entry.paths.is_empty() {
            return Err(Error::Infeasible(format!("commodity ({}, {}) carries no flow", entry.src, entry.dst)));
        }
        entries.push(entry);
    }
    Ok(WeightedPathSet { entries })
}
