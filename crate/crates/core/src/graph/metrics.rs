use std::collections::VecDeque;

use super::Digraph;
use crate::error::{Error, Result};

/// Marker for "no path" in distance vectors.
pub const UNREACHABLE: u32 = u32::MAX;

/// Hop distances from `s` along out-links.
pub fn bfs_distances(g: &Digraph, s: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; g.n()];
    let mut queue = VecDeque::from([s]);
    dist[s] = 0;
    while let Some(u) = queue.pop_front() {
        for e in g.out_edges(u) {
            if dist[e.dst] == UNREACHABLE {
                dist[e.dst] = dist[u] + 1;
                queue.push_back(e.dst);
            }
        }
    }
    dist
}

/// Hop distances from every node to `t` (BFS over in-links).
pub fn distances_to(g: &Digraph, t: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; g.n()];
    let mut queue = VecDeque::from([t]);
    dist[t] = 0;
    while let Some(v) = queue.pop_front() {
        for &id in g.in_edge_ids(v) {
            let u = g.edge(id).src;
            if dist[u] == UNREACHABLE {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

pub fn is_strongly_connected(g: &Digraph) -> bool {
    g.n() <= 1
        || (bfs_distances(g, 0).iter().all(|&d| d != UNREACHABLE)
            && distances_to(g, 0).iter().all(|&d| d != UNREACHABLE))
}

/// Row `s` holds the hop distances from `s`.
pub fn all_pairs_distances(g: &Digraph) -> Result<Vec<Vec<u32>>> {
    let mut rows = Vec::with_capacity(g.n());
    for s in 0..g.n() {
        let d = bfs_distances(g, s);
        if let Some(t) = d.iter().position(|&x| x == UNREACHABLE) {
            return Err(Error::Disconnected { from: s, to: t });
        }
        rows.push(d);
    }
    Ok(rows)
}

pub fn diameter(g: &Digraph) -> Result<u32> {
    Ok(all_pairs_distances(g)?.iter().flatten().copied().max().unwrap_or(0))
}

/// Sum of hop distances over all ordered pairs.
pub fn distance_sum(g: &Digraph) -> Result<u64> {
    Ok(all_pairs_distances(g)?.iter().flatten().map(|&d| d as u64).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_distances() {
        let g = Digraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        assert_eq!(diameter(&g).unwrap(), 2);
        assert_eq!(distance_sum(&g).unwrap(), 9);
        assert_eq!(distances_to(&g, 0), vec![0, 2, 1]);
    }

    #[test]
    fn disconnected_pair_is_named() {
        let g = Digraph::from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(!is_strongly_connected(&g));
        match diameter(&g) {
            Err(Error::Disconnected { from: 0, to: 2 }) => {}
            other => panic!("{other:?}"),
        }
    }
}
