use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A directed link; `cap` is in link-units (1.0 = one physical link).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub cap: f64,
}

/// Provenance carried alongside a graph and written into its file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl GraphMeta {
    pub fn new(generator: &str) -> Self {
        GraphMeta { generator: generator.into(), ..Default::default() }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Immutable capacitated digraph.
///
/// Edges are unique per `(src, dst)` and sorted by that pair, so the edge ids
/// of node `u`'s out-links form the contiguous range [`Digraph::out_range`].
/// Self-loops are allowed and count toward degrees.
#[derive(Clone, Debug)]
pub struct Digraph {
    n: usize,
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    in_edges: Vec<Vec<usize>>,
    labels: Option<Vec<String>>,
    meta: GraphMeta,
}

impl PartialEq for Digraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.edges == other.edges
            && self.labels == other.labels
            && self.meta == other.meta
    }
}

impl Digraph {
    /// Builds a graph, summing capacities of parallel links and dropping
    /// zero-capacity ones.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Digraph>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (k, (u, v, c)) in edges.into_iter().enumerate() {
            if u >= n || v >= n {
                return Err(invalid(format!("edge #{k} ({u},{v}) references a node outside 0..{n}")));
            }
            if !(c.is_finite() && c >= 0.0) {
                return Err(invalid(format!("edge #{k} ({u},{v}) has invalid capacity {c}")));
            }
            *merged.entry((u, v)).or_insert(0.0) += c;
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .filter(|&(_, c)| c > 0.0)
            .map(|((src, dst), cap)| Edge { src, dst, cap })
            .collect();
        Ok(Self::from_sorted(n, edges, None, GraphMeta::default()))
    }

    fn from_sorted(n: usize, edges: Vec<Edge>, labels: Option<Vec<String>>, meta: GraphMeta) -> Digraph {
        let mut out_start = vec![0; n + 1];
        let mut in_edges = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out_start[e.src + 1] += 1;
            in_edges[e.dst].push(id);
        }
        for u in 0..n {
            out_start[u + 1] += out_start[u];
        }
        Digraph { n, edges, out_start, in_edges, labels, meta }
    }

    pub fn with_meta(mut self, meta: GraphMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(invalid(format!("{} labels for {} nodes", labels.len(), self.n)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut GraphMeta {
        &mut self.meta
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Edge ids leaving `u`, in increasing `dst` order.
    pub fn out_range(&self, u: usize) -> Range<usize> {
        self.out_start[u]..self.out_start[u + 1]
    }

    pub fn out_edges(&self, u: usize) -> &[Edge] {
        &self.edges[self.out_range(u)]
    }

    /// Edge ids entering `v`, in increasing `src` order.
    pub fn in_edge_ids(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        let r = self.out_range(u);
        self.edges[r.clone()]
            .binary_search_by_key(&v, |e| e.dst)
            .ok()
            .map(|k| r.start + k)
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.out_range(u).len()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_edges[v].len()
    }

    /// The common out-degree if every node has the same one.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.out_degree(0);
        (0..self.n).all(|u| self.out_degree(u) == d).then_some(d)
    }

    pub fn total_capacity(&self) -> f64 {
        self.edges.iter().map(|e| e.cap).sum()
    }

    pub fn has_self_loops(&self) -> bool {
        self.edges.iter().any(|e| e.src == e.dst)
    }

    /// Same topology with every capacity multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Digraph> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("scale factor must be positive, got {c}")));
        }
        let edges = self.edges.iter().map(|e| Edge { cap: e.cap * c, ..*e }).collect();
        Ok(Self::from_sorted(self.n, edges, self.labels.clone(), self.meta.clone()))
    }

    /// Subgraph without the listed edge ids.
    pub fn without_edges(&self, removed: &[usize]) -> Digraph {
        let mut keep = vec![true; self.edges.len()];
        for &id in removed {
            keep[id] = false;
        }
        let edges = self.edges.iter().zip(&keep).filter(|(_, &k)| k).map(|(e, _)| *e).collect();
        Self::from_sorted(self.n, edges, self.labels.clone(), self.meta.clone())
    }

    /// Induced subgraph on the kept nodes, renumbered in increasing order.
    pub fn without_nodes(&self, removed: &[usize]) -> Digraph {
        let mut new_id = vec![usize::MAX; self.n];
        let mut next = 0;
        for u in 0..self.n {
            if !removed.contains(&u) {
                new_id[u] = next;
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| new_id[e.src] != usize::MAX && new_id[e.dst] != usize::MAX)
            .map(|e| Edge { src: new_id[e.src], dst: new_id[e.dst], cap: e.cap })
            .collect();
        let labels = self.labels.as_ref().map(|l| {
            (0..self.n).filter(|&u| new_id[u] != usize::MAX).map(|u| l[u].clone()).collect()
        });
        Self::from_sorted(next, edges, labels, self.meta.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_links_merge_and_zero_links_vanish() {
        let g = Digraph::from_edges(3, [(0, 1, 1.0), (0, 1, 0.5), (1, 2, 0.0), (2, 0, 1.0)]).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.edge(g.find_edge(0, 1).unwrap()).cap, 1.5);
        assert!(g.find_edge(1, 2).is_none());
    }

    #[test]
    fn rejects_out_of_range_and_negative() {
        assert!(Digraph::from_edges(2, [(0, 2, 1.0)]).is_err());
        assert!(Digraph::from_edges(2, [(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn node_removal_renumbers_compactly() {
        let g = Digraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        let h = g.without_nodes(&[1]);
        assert_eq!(h.n(), 3);
        assert_eq!(h.edges(), &[Edge { src: 1, dst: 2, cap: 1.0 }, Edge { src: 2, dst: 0, cap: 1.0 }]);
    }
}
