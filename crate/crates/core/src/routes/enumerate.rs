use std::collections::VecDeque;

use log::warn;
use rayon::prelude::*;

use super::{CommodityPaths, WeightedPath, WeightedPathSet};
use crate::error::{invalid, Error, Result};
use crate::graph::{all_pairs_distances, distances_to, Digraph};
use crate::mcf::all_to_all;

/// Paths kept per commodity when enumerating bounded-length paths.
pub const DEFAULT_PATH_CAP: usize = 64;

struct Dfs<'a> {
    g: &'a Digraph,
    dst: usize,
    to_dst: &'a [u32],
    limit: usize,
    on_path: Vec<bool>,
    path: Vec<usize>,
    found: Vec<Vec<usize>>,
}

impl Dfs<'_> {
    // simple paths from the current node reaching `dst` in exactly `left` hops
    fn walk(&mut self, left: usize) {
        if self.found.len() >= self.limit {
            return;
        }
        let u = *self.path.last().expect("path starts at the source");
        if left == 0 {
            if u == self.dst {
                self.found.push(self.path.clone());
            }
            return;
        }
        for e in self.g.out_edges(u) {
            let v = e.dst;
            if self.on_path[v] || (self.to_dst[v] as usize) > left - 1 || (v == self.dst && left > 1) {
                continue;
            }
            self.on_path[v] = true;
            self.path.push(v);
            self.walk(left - 1);
            self.path.pop();
            self.on_path[v] = false;
        }
    }
}

fn bounded_paths(g: &Digraph, s: usize, d: usize, to_dst: &[u32], l_max: usize, cap: usize) -> (Vec<Vec<usize>>, bool) {
    let mut dfs = Dfs {
        g,
        dst: d,
        to_dst,
        limit: cap.saturating_add(1),
        on_path: vec![false; g.n()],
        path: vec![s],
        found: Vec::new(),
    };
    dfs.on_path[s] = true;
    for len in (to_dst[s] as usize)..=l_max {
        dfs.walk(len);
    }
    let truncated = dfs.found.len() > cap;
    dfs.found.truncate(cap);
    (dfs.found, truncated)
}

/// Simple paths of at most `l_max` hops per ordered pair, shortest first
/// (lexicographic within a length), at most `cap` per commodity.
///
/// Returns the set (unit weights) and the number of truncated commodities.
/// An unlimited cap is only accepted for graphs with at most 12 nodes.
pub fn enum_paths_bounded(g: &Digraph, l_max: usize, cap: Option<usize>) -> Result<(WeightedPathSet, usize)> {
    let cap = match cap {
        Some(0) => return Err(invalid("path cap must be at least 1")),
        Some(c) => c,
        None if g.n() <= 12 => usize::MAX - 1,
        None => return Err(invalid(format!("unlimited path enumeration refused for {} nodes", g.n()))),
    };
    let dist = all_pairs_distances(g)?;
    let diam = dist.iter().flatten().copied().max().unwrap_or(0) as usize;
    if l_max < diam {
        return Err(invalid(format!("l_max={l_max} is below the diameter {diam}")));
    }
    let to: Vec<Vec<u32>> = (0..g.n()).map(|d| distances_to(g, d)).collect();
    let commodities = all_to_all(g.n());
    let results: Vec<(CommodityPaths, bool)> = commodities
        .par_iter()
        .map(|c| {
            let (paths, truncated) = bounded_paths(g, c.src, c.dst, &to[c.dst], l_max, cap);
            let entry = CommodityPaths {
                src: c.src,
                dst: c.dst,
                demand: 1.0,
                paths: paths.into_iter().map(|nodes| WeightedPath { nodes, weight: 1.0 }).collect(),
            };
            (entry, truncated)
        })
        .collect();
    let truncated = results.iter().filter(|r| r.1).count();
    if truncated > 0 {
        warn!("path enumeration truncated at {cap} paths for {truncated} commodities");
    }
    Ok((WeightedPathSet { entries: results.into_iter().map(|r| r.0).collect() }, truncated))
}

/// All shortest paths from `s` to `d` in lexicographic order.
pub fn shortest_paths(g: &Digraph, s: usize, d: usize) -> Vec<Vec<usize>> {
    let to = distances_to(g, d);
    if to[s] == u32::MAX {
        return Vec::new();
    }
    let (paths, _) = bounded_paths(g, s, d, &to, to[s] as usize, usize::MAX - 1);
    paths
}

/// Unit-capacity, unit-cost min-cost max-flow from `s` to `d`, decomposed into
/// link-disjoint paths (shortest first).
fn disjoint_for(g: &Digraph, s: usize, d: usize) -> Vec<Vec<usize>> {
    let m = g.num_edges();
    let mut flow = vec![false; m];
    loop {
        // Bellman-Ford (queue-based) on the residual graph
        let mut dist = vec![i64::MAX; g.n()];
        let mut pred: Vec<Option<(usize, bool)>> = vec![None; g.n()];
        let mut in_queue = vec![false; g.n()];
        let mut queue = VecDeque::from([s]);
        dist[s] = 0;
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            let mut relax = |v: usize, cost: i64, step: (usize, bool), queue: &mut VecDeque<usize>| {
                if dist[u] + cost < dist[v] {
                    dist[v] = dist[u] + cost;
                    pred[v] = Some(step);
                    if !in_queue[v] {
                        in_queue[v] = true;
                        queue.push_back(v);
                    }
                }
            };
            for e in g.out_range(u) {
                let v = g.edge(e).dst;
                if v != u && !flow[e] {
                    relax(v, 1, (e, true), &mut queue);
                }
            }
            for &e in g.in_edge_ids(u) {
                let v = g.edge(e).src;
                if v != u && flow[e] {
                    relax(v, -1, (e, false), &mut queue);
                }
            }
        }
        if dist[d] == i64::MAX {
            break;
        }
        let mut v = d;
        while v != s {
            let (e, forward) = pred[v].expect("reached nodes have predecessors");
            flow[e] = forward;
            v = if forward { g.edge(e).src } else { g.edge(e).dst };
        }
    }
    let mut paths = Vec::new();
    loop {
        let mut nodes = vec![s];
        let mut u = s;
        while u != d {
            let Some(e) = g.out_range(u).find(|&e| flow[e]) else { break };
            flow[e] = false;
            u = g.edge(e).dst;
            nodes.push(u);
        }
        if u != d {
            break;
        }
        paths.push(nodes);
    }
    paths.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    paths
}

/// A maximum set of link-disjoint paths per ordered pair, unit weights.
pub fn disjoint_paths(g: &Digraph) -> Result<WeightedPathSet> {
    all_pairs_distances(g)?;
    let entries: Vec<CommodityPaths> = all_to_all(g.n())
        .par_iter()
        .map(|c| CommodityPaths {
            src: c.src,
            dst: c.dst,
            demand: 1.0,
            paths: disjoint_for(g, c.src, c.dst)
                .into_iter()
                .map(|nodes| WeightedPath { nodes, weight: 1.0 })
                .collect(),
        })
        .collect();
    if let Some(e) = entries.iter().find(|e| e.paths.is_empty()) {
        return Err(Error::Disconnected { from: e.src, to: e.dst });
    }
    Ok(WeightedPathSet { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;
    use crate::routes::path_edges;

    #[test]
    fn ring_has_unique_paths() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let (set, truncated) = enum_paths_bounded(&g, 2, Some(DEFAULT_PATH_CAP)).unwrap();
        assert_eq!(truncated, 0);
        assert!(set.entries.iter().all(|e| e.paths.len() == 1));
        let dj = disjoint_paths(&g).unwrap();
        assert!(dj.entries.iter().all(|e| e.paths.len() == 1));
    }

    #[test]
    fn bipartite_same_side_pair_uses_all_two_hop_paths() {
        let g = gen::gen_complete_bipartite(8).unwrap();
        let dj = disjoint_paths(&g).unwrap();
        let e = dj.entries.iter().find(|e| e.src == 0 && e.dst == 1).unwrap();
        assert_eq!(e.paths.len(), 4);
        assert!(e.paths.iter().all(|p| p.nodes.len() == 3));
    }

    #[test]
    fn hypercube_antipodal_pair_has_three_disjoint_paths() {
        let g = gen::gen_hypercube(3).unwrap();
        let dj = disjoint_paths(&g).unwrap();
        let e = dj.entries.iter().find(|e| e.src == 0 && e.dst == 7).unwrap();
        assert_eq!(e.paths.len(), 3);
        let mut used: Vec<usize> = e.paths.iter().flat_map(|p| path_edges(&g, &p.nodes).unwrap()).collect();
        let before = used.len();
        used.sort_unstable();
        used.dedup();
        assert_eq!(before, used.len());
    }

    #[test]
    fn truncation_is_reported_on_tori() {
        let g = gen::gen_torus(&[4, 4], true).unwrap();
        let (set, truncated) = enum_paths_bounded(&g, 4, Some(8)).unwrap();
        assert!(truncated > 0);
        assert!(set.entries.iter().all(|e| e.paths.len() <= 8));
        // shortest first
        for e in &set.entries {
            assert!(e.paths.windows(2).all(|w| w[0].nodes.len() <= w[1].nodes.len()));
        }
    }

    #[test]
    fn unlimited_cap_refused_on_large_graphs() {
        let g = gen::gen_torus(&[4, 4], true).unwrap();
        assert!(enum_paths_bounded(&g, 4, None).is_err());
    }
}
