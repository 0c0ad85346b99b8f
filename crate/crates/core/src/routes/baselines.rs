//! Single- and equal-split routing baselines.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::enumerate::shortest_paths;
use super::{path_edges, CommodityPaths, Route, RouteTable, WeightedPath, WeightedPathSet};
use crate::error::{invalid, Error, Result};
use crate::graph::gen::{torus_coords, torus_index};
use crate::graph::{is_strongly_connected, Digraph};
use crate::mcf::all_to_all;

/// Predecessor edge per node of a shortest-path tree from `s`; equal
/// distances keep the predecessor with the smaller node id.
fn dijkstra_tree(g: &Digraph, s: usize, w: &[u64]) -> Vec<usize> {
    let mut dist = vec![u64::MAX; g.n()];
    let mut pred = vec![usize::MAX; g.n()];
    let mut heap = BinaryHeap::from([Reverse((0u64, s))]);
    dist[s] = 0;
    while let Some(Reverse((du, u))) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        for e in g.out_range(u) {
            let v = g.edge(e).dst;
            if v == u {
                continue;
            }
            let nd = du + w[e];
            let better = nd < dist[v] || (nd == dist[v] && pred[v] != usize::MAX && u < g.edge(pred[v]).src);
            if better && v != s {
                if nd < dist[v] {
                    heap.push(Reverse((nd, v)));
                }
                dist[v] = nd;
                pred[v] = e;
            }
        }
    }
    pred
}

fn tree_path(g: &Digraph, pred: &[usize], s: usize, d: usize) -> Vec<usize> {
    let mut nodes = vec![d];
    let mut v = d;
    while v != s {
        v = g.edge(pred[v]).src;
        nodes.push(v);
    }
    nodes.reverse();
    nodes
}

fn require_connected(g: &Digraph) -> Result<()> {
    if g.n() < 2 {
        return Err(invalid("routing needs at least two nodes"));
    }
    if !is_strongly_connected(g) {
        return Err(Error::InvalidArgument("routing needs a strongly connected graph".into()));
    }
    Ok(())
}

fn initial_weights(g: &Digraph) -> Vec<u64> {
    let n = g.n() as u64;
    vec![n * n; g.num_edges()]
}

fn sorted_table(mut routes: Vec<Route>) -> RouteTable {
    routes.sort_by_key(|r| (r.src, r.dst));
    RouteTable { routes }
}

/// Single-source shortest-path routing: sources in seeded random order each
/// route to all destinations over one shortest-path tree, after which every
/// link's weight grows by the number of that source's routes crossing it.
/// Weights start at N^2.
pub fn sssp_routes(g: &Digraph, seed: u64) -> Result<RouteTable> {
    require_connected(g)?;
    let mut w = initial_weights(g);
    let mut sources: Vec<usize> = (0..g.n()).collect();
    sources.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut routes = Vec::with_capacity(g.n() * (g.n() - 1));
    for s in sources {
        let pred = dijkstra_tree(g, s, &w);
        let mut uses = vec![0u64; g.num_edges()];
        for d in (0..g.n()).filter(|&d| d != s) {
            let nodes = tree_path(g, &pred, s, d);
            for e in path_edges(g, &nodes)? {
                uses[e] += 1;
            }
            routes.push(Route { src: s, dst: d, nodes });
        }
        for (we, u) in w.iter_mut().zip(uses) {
            *we += u;
        }
    }
    Ok(sorted_table(routes))
}

/// Load-aware shortest path: commodities in seeded random order, each on a
/// shortest path under weights that start at N^2 and grow by one per route.
pub fn load_aware_sp(g: &Digraph, seed: u64) -> Result<RouteTable> {
    require_connected(g)?;
    let mut w = initial_weights(g);
    let mut commodities = all_to_all(g.n());
    commodities.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut routes = Vec::with_capacity(commodities.len());
    for c in commodities {
        let pred = dijkstra_tree(g, c.src, &w);
        let nodes = tree_path(g, &pred, c.src, c.dst);
        for e in path_edges(g, &nodes)? {
            w[e] += 1;
        }
        routes.push(Route { src: c.src, dst: c.dst, nodes });
    }
    Ok(sorted_table(routes))
}

/// Every shortest path of every commodity, weights `1 / count`.
pub fn ewsp_routes(g: &Digraph) -> Result<WeightedPathSet> {
    require_connected(g)?;
    let entries = all_to_all(g.n())
        .into_iter()
        .map(|c| {
            let paths = shortest_paths(g, c.src, c.dst);
            let w = 1.0 / paths.len() as f64;
            CommodityPaths {
                src: c.src,
                dst: c.dst,
                demand: 1.0,
                paths: paths.into_iter().map(|nodes| WeightedPath { nodes, weight: w }).collect(),
            }
        })
        .collect();
    Ok(WeightedPathSet { entries })
}

/// Dimension-ordered routing on a torus built by `gen_torus(dims, true)`:
/// dimensions in order, each along the shorter ring direction, ties going
/// in the positive direction.
pub fn dor_routes(g: &Digraph, dims: &[usize]) -> Result<RouteTable> {
    if dims.is_empty() || dims.iter().product::<usize>() != g.n() {
        return Err(invalid(format!("graph with {} nodes is not a {dims:?} torus", g.n())));
    }
    let mut routes = Vec::with_capacity(g.n() * (g.n() - 1));
    for c in all_to_all(g.n()) {
        let mut at = torus_coords(dims, c.src);
        let goal = torus_coords(dims, c.dst);
        let mut nodes = vec![c.src];
        for (i, &k) in dims.iter().enumerate() {
            let fwd = (goal[i] + k - at[i]) % k;
            let (steps, up) = if fwd <= k - fwd { (fwd, true) } else { (k - fwd, false) };
            for _ in 0..steps {
                at[i] = if up { (at[i] + 1) % k } else { (at[i] + k - 1) % k };
                nodes.push(torus_index(dims, &at));
            }
        }
        path_edges(g, &nodes).map_err(|_| invalid(format!("graph is not a bidirectional {dims:?} torus")))?;
        routes.push(Route { src: c.src, dst: c.dst, nodes });
    }
    Ok(RouteTable { routes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{all_pairs_distances, gen};
    use crate::routes::eval_link_load;

    #[test]
    fn ring_routes_are_forced() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let a = sssp_routes(&g, 1).unwrap();
        let b = load_aware_sp(&g, 2).unwrap();
        assert_eq!(a, b);
        let e = ewsp_routes(&g).unwrap();
        assert_eq!(e, a.to_pathset());
        assert!((eval_link_load(&g, &e).unwrap().max_load - 3.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_determinism() {
        let g = gen::gen_kautz(20, 3).unwrap();
        assert_eq!(sssp_routes(&g, 9).unwrap(), sssp_routes(&g, 9).unwrap());
        assert_eq!(load_aware_sp(&g, 9).unwrap(), load_aware_sp(&g, 9).unwrap());
    }

    #[test]
    fn dor_walks_dimensions_in_order() {
        let dims = [3, 3, 3];
        let g = gen::gen_torus(&dims, true).unwrap();
        let t = dor_routes(&g, &dims).unwrap();
        let dst = torus_index(&dims, &[1, 2, 0]);
        let r = t.routes.iter().find(|r| r.src == 0 && r.dst == dst).unwrap();
        let coords: Vec<Vec<usize>> = r.nodes.iter().map(|&v| torus_coords(&dims, v)).collect();
        assert_eq!(coords, vec![vec![0, 0, 0], vec![1, 0, 0], vec![1, 2, 0]]);
        let dist = all_pairs_distances(&g).unwrap();
        assert!(t.routes.iter().all(|r| r.nodes.len() - 1 == dist[r.src][r.dst] as usize));
        assert!(t.routes.iter().all(|r| r.src != r.dst));
    }

    #[test]
    fn dor_rejects_non_tori() {
        let g = gen::gen_kautz(27, 4).unwrap();
        assert!(dor_routes(&g, &[3, 3, 3]).is_err());
    }

    #[test]
    fn ewsp_adjacent_hypercube_pair() {
        let g = gen::gen_hypercube(3).unwrap();
        let e = ewsp_routes(&g).unwrap();
        let c = e.entries.iter().find(|c| c.src == 0 && c.dst == 1).unwrap();
        assert_eq!(c.paths.len(), 1);
        assert_eq!(c.paths[0].weight, 1.0);
    }
}
