//! Topology generators and graph transformations.
//!
//! Every generator is a pure function of its arguments; seeded ones derive all
//! randomness from a ChaCha stream keyed by the seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::is_strongly_connected;
use super::{Digraph, GraphMeta};
use crate::error::{invalid, Error, Result};

const MAX_RETRIES: usize = 1000;

fn unit_graph(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>, meta: GraphMeta) -> Result<Digraph> {
    Ok(Digraph::from_edges(n, pairs.into_iter().map(|(u, v)| (u, v, 1.0)))?.with_meta(meta))
}

/// Generalized Kautz digraph: `u -> (-d*u - j) mod n` for `j = 1..=d`.
pub fn gen_kautz(n: usize, d: usize) -> Result<Digraph> {
    if n < 2 || d < 1 || d >= n {
        return Err(invalid(format!("generalized Kautz needs n >= 2 and 1 <= d < n, got n={n}, d={d}")));
    }
    let (ni, di) = (n as i64, d as i64);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (1..=di).map(move |j| (u, (-di * u as i64 - j).rem_euclid(ni) as usize)))
        .collect();
    let loops = pairs.iter().filter(|(u, v)| u == v).count();
    let mut meta = GraphMeta::new("genkautz").param("n", n).param("d", d);
    if loops > 0 {
        meta.notes.push(format!("{loops} self-loop(s); they carry no flow"));
    }
    unit_graph(n, pairs, meta)
}

/// Generalized de Bruijn digraph: `u -> (d*u + j) mod n` for `j = 0..d`.
pub fn gen_de_bruijn(n: usize, d: usize) -> Result<Digraph> {
    if n < 2 || d < 1 || d >= n {
        return Err(invalid(format!("de Bruijn needs n >= 2 and 1 <= d < n, got n={n}, d={d}")));
    }
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (0..d).map(move |j| (u, (d * u + j) % n))).collect();
    unit_graph(n, pairs, GraphMeta::new("debruijn").param("n", n).param("d", d))
}

/// Coordinates of torus node `idx`; the first dimension varies fastest.
pub fn torus_coords(dims: &[usize], mut idx: usize) -> Vec<usize> {
    dims.iter()
        .map(|&k| {
            let c = idx % k;
            idx /= k;
            c
        })
        .collect()
}

pub fn torus_index(dims: &[usize], coords: &[usize]) -> usize {
    coords.iter().zip(dims).rev().fold(0, |acc, (&c, &k)| acc * k + c)
}

/// Torus with `+1` links in every dimension, plus `-1` links when
/// `bidirectional`. In an extent-2 dimension both directions reach the same
/// neighbor and share one link.
pub fn gen_torus(dims: &[usize], bidirectional: bool) -> Result<Digraph> {
    if dims.is_empty() || dims.iter().any(|&k| k < 2) {
        return Err(invalid(format!("torus extents must be non-empty and >= 2, got {dims:?}")));
    }
    let n: usize = dims.iter().product();
    let mut pairs = Vec::new();
    for u in 0..n {
        let c = torus_coords(dims, u);
        for (i, &k) in dims.iter().enumerate() {
            let mut plus = c.clone();
            plus[i] = (c[i] + 1) % k;
            pairs.push((u, torus_index(dims, &plus)));
            if bidirectional && k > 2 {
                let mut minus = c.clone();
                minus[i] = (c[i] + k - 1) % k;
                pairs.push((u, torus_index(dims, &minus)));
            }
        }
    }
    let mut meta = GraphMeta::new("torus")
        .param("dims", dims.to_vec())
        .param("bidirectional", bidirectional);
    if dims.contains(&2) {
        meta.notes.push("extent-2 dimensions use a single link per node pair".into());
    }
    unit_graph(n, pairs, meta)
}

pub fn gen_hypercube(k: usize) -> Result<Digraph> {
    if k == 0 || k > 24 {
        return Err(invalid(format!("hypercube dimension must be in 1..=24, got {k}")));
    }
    let n = 1usize << k;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..k).map(move |i| (u, u ^ (1 << i)))).collect();
    unit_graph(n, pairs, GraphMeta::new("hypercube").param("k", k))
}

fn twisted_neighbors(u: usize, bits: usize, out: &mut Vec<usize>) {
    if bits == 1 {
        out.push(u ^ 1);
        return;
    }
    let low = bits - 2;
    twisted_neighbors(u, low, out);
    let parity = (u & ((1 << low) - 1)).count_ones() % 2;
    out.push(u ^ (1 << (bits - 1)));
    out.push(if parity == 0 { u ^ (1 << (bits - 2)) } else { u ^ (3 << (bits - 2)) });
}

/// Twisted cube: for an odd number of bits, the two leading bits either flip
/// singly or, when the parity of the remaining bits is odd, the second one is
/// replaced by a joint flip of both. An even `k` adds one plain hypercube
/// dimension on top of the odd twisted cube of `k - 1` bits.
pub fn gen_twisted_hypercube(k: usize) -> Result<Digraph> {
    if !(3..=24).contains(&k) {
        return Err(invalid(format!("twisted hypercube needs 3 <= k <= 24, got {k}")));
    }
    let n = 1usize << k;
    let odd = if k % 2 == 1 { k } else { k - 1 };
    let mut pairs = Vec::new();
    let mut nb = Vec::new();
    for u in 0..n {
        nb.clear();
        twisted_neighbors(u, odd, &mut nb);
        if odd < k {
            nb.push(u ^ (1 << (k - 1)));
        }
        pairs.extend(nb.iter().map(|&v| (u, v)));
    }
    unit_graph(n, pairs, GraphMeta::new("thypercube").param("k", k))
}

/// Complete bipartite graph between `0..n/2` and `n/2..n`, both directions.
pub fn gen_complete_bipartite(n: usize) -> Result<Digraph> {
    if n < 4 || n % 2 == 1 {
        return Err(invalid(format!("complete bipartite needs an even n >= 4, got {n}")));
    }
    let h = n / 2;
    let pairs: Vec<(usize, usize)> =
        (0..h).flat_map(|u| (h..n).flat_map(move |v| [(u, v), (v, u)])).collect();
    unit_graph(n, pairs, GraphMeta::new("bipartite").param("n", n))
}

/// Complete digraph on `n` nodes.
pub fn gen_complete(n: usize) -> Result<Digraph> {
    if n < 2 {
        return Err(invalid("complete digraph needs n >= 2"));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
    unit_graph(n, pairs, GraphMeta::new("complete").param("n", n))
}

/// Union of `d` fixed-point-free permutations with no repeated link,
/// regenerated until strongly connected.
pub fn gen_random_regular(n: usize, d: usize, seed: u64) -> Result<Digraph> {
    if d < 1 || n <= d {
        return Err(invalid(format!("random regular needs n > d >= 1, got n={n}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'graph: for _ in 0..MAX_RETRIES {
        let mut used = vec![false; n * n];
        let mut pairs = Vec::with_capacity(n * d);
        for _ in 0..d {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut placed = false;
            for _ in 0..100 * MAX_RETRIES {
                perm.shuffle(&mut rng);
                if (0..n).all(|u| perm[u] != u && !used[u * n + perm[u]]) {
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'graph;
            }
            for u in 0..n {
                used[u * n + perm[u]] = true;
                pairs.push((u, perm[u]));
            }
        }
        let meta = GraphMeta::new("rrg").param("n", n).param("d", d).seeded(seed);
        let g = unit_graph(n, pairs, meta)?;
        if is_strongly_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::Construction(format!("no strongly connected random {d}-regular digraph on {n} nodes")))
}

/// Network-formation heuristic: route every ordered pair over a cheapest path
/// in the complete graph (unused links cost `eps`), add 1 to the cost of each
/// link used, and once a node has `d` used out-links (in-links) drop its
/// remaining unused out-links (in-links). The used links form the result.
pub fn gen_shortest_path_expander(n: usize, d: usize, seed: u64, eps: f64) -> Result<Digraph> {
    if d < 2 || n <= d {
        return Err(invalid(format!("shortest path expander needs n > d >= 2, got n={n}, d={d}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut commodities: Vec<(usize, usize)> =
        (0..n).flat_map(|s| (0..n).filter(move |&t| t != s).map(move |t| (s, t))).collect();
    for attempt in 0..MAX_RETRIES {
        commodities.shuffle(&mut rng);
        if let Some(pairs) = lay_shortest_paths(n, d, eps, &commodities) {
            let meta = GraphMeta::new("spx")
                .param("n", n)
                .param("d", d)
                .param("eps", eps)
                .param("attempt", attempt)
                .seeded(seed);
            let g = unit_graph(n, pairs, meta)?;
            if g.regular_degree() == Some(d) && is_strongly_connected(&g) {
                return Ok(g);
            }
        }
    }
    Err(Error::Construction(format!("shortest path expander (n={n}, d={d}) did not converge")))
}

fn lay_shortest_paths(n: usize, d: usize, eps: f64, order: &[(usize, usize)]) -> Option<Vec<(usize, usize)>> {
    // weight INFINITY marks a removed link; weight > eps marks a used one
    let mut w = vec![eps; n * n];
    for u in 0..n {
        w[u * n + u] = f64::INFINITY;
    }
    let mut used_out = vec![0usize; n];
    let mut used_in = vec![0usize; n];
    let mut dist = vec![0.0; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    for &(s, t) in order {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        done.fill(false);
        dist[s] = 0.0;
        loop {
            let mut u = usize::MAX;
            for v in 0..n {
                if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX || u == t {
                break;
            }
            done[u] = true;
            for v in 0..n {
                let nd = dist[u] + w[u * n + v];
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = u;
                }
            }
        }
        if !dist[t].is_finite() {
            return None;
        }
        let mut v = t;
        while v != s {
            let u = pred[v];
            if w[u * n + v] <= eps {
                used_out[u] += 1;
                used_in[v] += 1;
            }
            w[u * n + v] += 1.0;
            v = u;
        }
        for u in 0..n {
            if used_out[u] >= d {
                for v in 0..n {
                    if w[u * n + v] <= eps {
                        w[u * n + v] = f64::INFINITY;
                    }
                }
            }
            if used_in[u] >= d {
                for v in 0..n {
                    if w[v * n + u] <= eps {
                        w[v * n + u] = f64::INFINITY;
                    }
                }
            }
        }
    }
    let pairs = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| w[u * n + v].is_finite() && w[u * n + v] > eps)
        .collect();
    Some(pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PunctureMode {
    Edges,
    Nodes,
}

/// Removes `count` random bidirectional link pairs (or nodes), resampling
/// until the result is strongly connected.
pub fn puncture(g: &Digraph, mode: PunctureMode, count: usize, seed: u64) -> Result<Digraph> {
    if count == 0 {
        return Ok(g.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meta = g.meta().clone();
    meta.notes.push(format!("punctured: {count} {mode:?} removed (seed {seed})").to_lowercase());
    match mode {
        PunctureMode::Edges => {
            let links: Vec<(usize, usize)> = g
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, e)| e.src < e.dst)
                .filter_map(|(id, e)| g.find_edge(e.dst, e.src).map(|rev| (id, rev)))
                .collect();
            if links.len() < count {
                return Err(invalid(format!("only {} bidirectional links, cannot remove {count}", links.len())));
            }
            for _ in 0..MAX_RETRIES {
                let picked: Vec<usize> = rand::seq::index::sample(&mut rng, links.len(), count).into_vec();
                let removed: Vec<usize> = picked.iter().flat_map(|&k| [links[k].0, links[k].1]).collect();
                let h = g.without_edges(&removed);
                if is_strongly_connected(&h) {
                    return Ok(h.with_meta(meta));
                }
            }
        }
        PunctureMode::Nodes => {
            if count + 2 > g.n() {
                return Err(invalid(format!("cannot remove {count} of {} nodes", g.n())));
            }
            for _ in 0..MAX_RETRIES {
                let mut removed = rand::seq::index::sample(&mut rng, g.n(), count).into_vec();
                removed.sort_unstable();
                let h = g.without_nodes(&removed);
                if is_strongly_connected(&h) {
                    return Ok(h.with_meta(meta));
                }
            }
        }
    }
    Err(Error::Construction(format!("no strongly connected puncturing found in {MAX_RETRIES} tries")))
}

/// Where an original node lives in a host-augmented graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMapping {
    /// `(host, nic_in, nic_out)` per original node.
    pub nodes: Vec<(usize, usize, usize)>,
}

impl NodeMapping {
    pub fn hosts(&self) -> Vec<usize> {
        self.nodes.iter().map(|t| t.0).collect()
    }
}

/// Splits every node into host, NIC-in and NIC-out so that all traffic a node
/// sources, sinks or forwards crosses its host links of capacity
/// `host_capacity`. Hosts keep the original ids; NIC-in of `v` is `n + v` and
/// NIC-out is `2n + v`.
pub fn augment_host_bottleneck(g: &Digraph, host_capacity: f64) -> Result<(Digraph, NodeMapping)> {
    if !(host_capacity > 0.0 && host_capacity.is_finite()) {
        return Err(invalid(format!("host capacity must be positive and finite, got {host_capacity}")));
    }
    let n = g.n();
    if n < 2 {
        return Err(invalid("host augmentation needs at least two nodes"));
    }
    let mut edges = Vec::with_capacity(g.num_edges() + 2 * n);
    for v in 0..n {
        edges.push((n + v, v, host_capacity));
        edges.push((v, 2 * n + v, host_capacity));
    }
    for e in g.edges() {
        edges.push((2 * n + e.src, n + e.dst, e.cap));
    }
    // traffic flows between hosts `0..hosts` only
    let mut meta = g.meta().clone().param("hosts", n);
    meta.notes.push(format!("host bottleneck augmentation, host capacity {host_capacity}"));
    let h = Digraph::from_edges(3 * n, edges)?.with_meta(meta);
    let mapping = NodeMapping { nodes: (0..n).map(|v| (v, n + v, 2 * n + v)).collect() };
    Ok((h, mapping))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{diameter, Edge};

    fn out(g: &Digraph, u: usize) -> Vec<usize> {
        g.out_edges(u).iter().map(|e| e.dst).collect()
    }

    #[test]
    fn kautz_small_cases() {
        let g = gen_kautz(6, 2).unwrap();
        assert_eq!(out(&g, 0), vec![4, 5]);
        assert_eq!(out(&g, 1), vec![2, 3]);
        let g = gen_kautz(2, 1).unwrap();
        assert_eq!(g.edges(), &[Edge { src: 0, dst: 1, cap: 1.0 }, Edge { src: 1, dst: 0, cap: 1.0 }]);
        assert!(gen_kautz(4, 4).is_err());
    }

    #[test]
    fn kautz_keeps_self_loops() {
        let g = gen_kautz(27, 4).unwrap();
        assert!(g.has_self_loops());
        assert_eq!(g.regular_degree(), Some(4));
        assert!(!g.meta().notes.is_empty());
    }

    #[test]
    fn kautz_100_diameter() {
        assert!(diameter(&gen_kautz(100, 4).unwrap()).unwrap() <= 5);
    }

    #[test]
    fn de_bruijn_cases() {
        let g = gen_de_bruijn(8, 2).unwrap();
        assert_eq!(out(&g, 3), vec![6, 7]);
        assert_eq!(out(&g, 0), vec![0, 1]);
        let g = gen_de_bruijn(4, 2).unwrap();
        assert_eq!(g.num_edges(), 8);
        assert!(g.find_edge(0, 0).is_some() && g.find_edge(3, 3).is_some());
    }

    #[test]
    fn torus_shapes() {
        let g = gen_torus(&[3, 3, 3], true).unwrap();
        assert_eq!((g.n(), g.regular_degree()), (27, Some(6)));
        assert_eq!(diameter(&g).unwrap(), 3);
        let g = gen_torus(&[4], true).unwrap();
        assert_eq!(g.regular_degree(), Some(2));
        let g = gen_torus(&[10, 10], true).unwrap();
        assert_eq!((g.n(), g.regular_degree()), (100, Some(4)));
        let g = gen_torus(&[2, 3], true).unwrap();
        assert_eq!(g.regular_degree(), Some(3));
        assert!(gen_torus(&[], true).is_err());
        let ring = gen_torus(&[3], false).unwrap();
        assert_eq!(ring.num_edges(), 3);
        assert_eq!(torus_index(&[3, 3, 3], &torus_coords(&[3, 3, 3], 17)), 17);
    }

    #[test]
    fn hypercubes() {
        let g = gen_hypercube(3).unwrap();
        assert_eq!((g.n(), g.regular_degree(), diameter(&g).unwrap()), (8, Some(3), 3));
        assert_eq!(gen_hypercube(1).unwrap().num_edges(), 2);
        assert!(gen_hypercube(0).is_err());
        for k in 3..=7 {
            let t = gen_twisted_hypercube(k).unwrap();
            assert_eq!(t.regular_degree(), Some(k));
            for e in t.edges() {
                assert!(t.find_edge(e.dst, e.src).is_some());
            }
            assert_eq!(diameter(&t).unwrap() as usize, (k + 2) / 2, "k={k}");
        }
    }

    #[test]
    fn bipartite() {
        let g = gen_complete_bipartite(8).unwrap();
        assert_eq!((g.regular_degree(), g.num_edges()), (Some(4), 32));
        assert_eq!(gen_complete_bipartite(4).unwrap().regular_degree(), Some(2));
        assert!(gen_complete_bipartite(7).is_err());
    }

    #[test]
    fn random_regular_is_regular_and_deterministic() {
        let g = gen_random_regular(10, 2, 7).unwrap();
        for u in 0..10 {
            assert_eq!((g.out_degree(u), g.in_degree(u)), (2, 2));
        }
        assert_eq!(g, gen_random_regular(10, 2, 7).unwrap());
        let big = gen_random_regular(100, 4, 1).unwrap();
        assert!(is_strongly_connected(&big));
    }

    #[test]
    fn shortest_path_expander_is_regular() {
        let g = gen_shortest_path_expander(8, 2, 0, 1e-3).unwrap();
        assert_eq!(g.regular_degree(), Some(2));
        assert!(gen_shortest_path_expander(8, 2, 0, 0.0).is_err());
    }

    #[test]
    fn puncturing() {
        let t = gen_torus(&[3, 3, 3], true).unwrap();
        let p = puncture(&t, PunctureMode::Edges, 3, 5).unwrap();
        assert_eq!((p.n(), p.num_edges()), (27, 156));
        assert_eq!(puncture(&t, PunctureMode::Edges, 0, 5).unwrap(), t);
        let q = puncture(&t, PunctureMode::Nodes, 3, 5).unwrap();
        assert_eq!(q.n(), 24);
        assert!(q.regular_degree().is_none());
    }

    #[test]
    fn augmentation_shape() {
        let t = gen_torus(&[3, 3, 3], true).unwrap();
        let (h, map) = augment_host_bottleneck(&t, 4.0).unwrap();
        assert_eq!(h.n(), 81);
        assert_eq!(h.num_edges(), t.num_edges() + 54);
        assert_eq!(map.nodes[5], (5, 32, 59));
        let one = Digraph::from_edges(1, []).unwrap();
        assert!(augment_host_bottleneck(&one, 4.0).is_err());
    }
}
