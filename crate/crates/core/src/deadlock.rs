//! Channel dependencies of wormhole-routed paths and virtual-layer
//! assignment that keeps every layer's dependencies acyclic.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::routes::path_edges;

/// Links of the graph as nodes; an arc `(e1, e2)` whenever some route
/// crosses link `e1` and then link `e2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDependencyGraph {
    pub num_links: usize,
    pub arcs: BTreeSet<(usize, usize)>,
}

fn route_arcs(g: &Digraph, nodes: &[usize]) -> Result<Vec<(usize, usize)>> {
    let links = path_edges(g, nodes)?;
    Ok(links.windows(2).map(|w| (w[0], w[1])).collect())
}

pub fn build_cdg(g: &Digraph, routes: &[Vec<usize>]) -> Result<ChannelDependencyGraph> {
    let mut arcs = BTreeSet::new();
    for r in routes {
        arcs.extend(route_arcs(g, r)?);
    }
    Ok(ChannelDependencyGraph { num_links: g.num_edges(), arcs })
}

/// Layer of every route, indexed like the input routes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAssignment {
    pub layers: Vec<usize>,
    pub count: usize,
}

/// One layer's dependency graph with a maintained topological order
/// (dynamic ordering in the style of Pearce and Kelly): an arc that agrees
/// with the order is free; otherwise only the affected order window is
/// searched and reordered.
struct Layer {
    ord: Vec<usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    mult: HashMap<(usize, usize), u32>,
}

impl Layer {
    fn new(n: usize) -> Self {
        Layer { ord: (0..n).collect(), succ: vec![Vec::new(); n], pred: vec![Vec::new(); n], mult: HashMap::new() }
    }

    /// Inserts `x -> y` unless it closes a cycle; true on success.
    fn insert(&mut self, x: usize, y: usize) -> bool {
        if x == y {
            return false;
        }
        if let Some(m) = self.mult.get_mut(&(x, y)) {
            *m += 1;
            return true;
        }
        if self.ord[x] > self.ord[y] {
            let (lb, ub) = (self.ord[y], self.ord[x]);
            let Some(fwd) = self.reach(y, ub, true, Some(x)) else {
                return false;
            };
            let back = self.reach(x, lb, false, None).expect("backward search has no target");
            self.reorder(back, fwd);
        }
        self.succ[x].push(y);
        self.pred[y].push(x);
        self.mult.insert((x, y), 1);
        true
    }

    fn remove(&mut self, x: usize, y: usize) {
        let m = self.mult.get_mut(&(x, y)).expect("removing an absent arc");
        *m -= 1;
        if *m == 0 {
            self.mult.remove(&(x, y));
            let i = self.succ[x].iter().position(|&v| v == y).unwrap();
            self.succ[x].swap_remove(i);
            let i = self.pred[y].iter().position(|&v| v == x).unwrap();
            self.pred[y].swap_remove(i);
        }
    }

    /// Nodes reachable from `start` whose order stays within the bound
    /// (`<= bound` forward, `>= bound` backward); None if `target` is hit.
    fn reach(&self, start: usize, bound: usize, forward: bool, target: Option<usize>) -> Option<Vec<usize>> {
        let mut seen = vec![start];
        let mut stack = vec![start];
        let mut mark: HashMap<usize, ()> = HashMap::from([(start, ())]);
        while let Some(u) = stack.pop() {
            let next = if forward { &self.succ[u] } else { &self.pred[u] };
            for &v in next {
                if Some(v) == target {
                    return None;
                }
                let inside = if forward { self.ord[v] <= bound } else { self.ord[v] >= bound };
                if inside && mark.insert(v, ()).is_none() {
                    seen.push(v);
                    stack.push(v);
                }
            }
        }
        Some(seen)
    }

    fn reorder(&mut self, mut back: Vec<usize>, mut fwd: Vec<usize>) {
        back.sort_by_key(|&v| self.ord[v]);
        fwd.sort_by_key(|&v| self.ord[v]);
        let mut slots: Vec<usize> = back.iter().chain(&fwd).map(|&v| self.ord[v]).collect();
        slots.sort_unstable();
        for (v, slot) in back.into_iter().chain(fwd).zip(slots) {
            self.ord[v] = slot;
        }
    }

    /// Adds all of a route's arcs, or none of them.
    fn try_route(&mut self, arcs: &[(usize, usize)]) -> bool {
        for (i, &(x, y)) in arcs.iter().enumerate() {
            if !self.insert(x, y) {
                for &(a, b) in arcs[..i].iter().rev() {
                    self.remove(a, b);
                }
                return false;
            }
        }
        true
    }
}

/// Processing order: more hops first, then lexicographic node sequence.
pub fn lash_order(routes: &[Vec<usize>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..routes.len()).collect();
    order.sort_by(|&a, &b| routes[b].len().cmp(&routes[a].len()).then_with(|| routes[a].cmp(&routes[b])));
    order
}

/// Greedy sequential layering: each route, in `lash_order`, goes to the
/// lowest layer whose dependency graph stays acyclic with it; a new layer
/// opens when none fits.
pub fn lash_sequential(g: &Digraph, routes: &[Vec<usize>], max_layers: usize) -> Result<LayerAssignment> {
    let arcs: Vec<Vec<(usize, usize)>> = routes.iter().map(|r| route_arcs(g, r)).collect::<Result<_>>()?;
    let mut layers: Vec<Layer> = Vec::new();
    let mut assigned = vec![0; routes.len()];
    for i in lash_order(routes) {
        let fit = layers.iter_mut().position(|l| l.try_route(&arcs[i]));
        assigned[i] = match fit {
            Some(k) => k,
            None => {
                if layers.len() == max_layers {
                    return Err(Error::Layers(format!(
                        "route {:?} does not fit in {max_layers} layers",
                        routes[i]
                    )));
                }
                let mut l = Layer::new(g.num_edges());
                // a lone route is a path of distinct links, hence acyclic
                assert!(l.try_route(&arcs[i]), "a simple route cannot depend on itself");
                layers.push(l);
                layers.len() - 1
            }
        };
    }
    Ok(LayerAssignment { layers: assigned, count: layers.len() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerVerdict {
    /// A topological order of the links used in each layer.
    Acyclic { orders: Vec<Vec<usize>> },
    /// A dependency cycle, as a closed sequence of links, in `layer`.
    Cycle { layer: usize, links: Vec<usize> },
}

impl LayerVerdict {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, LayerVerdict::Acyclic { .. })
    }
}

/// Rebuilds each layer's dependency graph from scratch and returns either a
/// topological order per layer or the first cycle found.
pub fn verify_layers(g: &Digraph, routes: &[Vec<usize>], assignment: &LayerAssignment) -> Result<LayerVerdict> {
    if assignment.layers.len() != routes.len() {
        return Err(Error::Layers(format!("{} routes but {} layer entries", routes.len(), assignment.layers.len())));
    }
    let count = assignment.layers.iter().map(|&l| l + 1).max().unwrap_or(0).max(assignment.count);
    let mut per: Vec<Vec<Vec<usize>>> = vec![Vec::new(); count];
    for (r, &l) in routes.iter().zip(&assignment.layers) {
        per[l].push(r.clone());
    }
    let results: Vec<std::result::Result<Vec<usize>, Vec<usize>>> = per
        .par_iter()
        .map(|rs| build_cdg(g, rs).map(|cdg| topo_or_cycle(&cdg)))
        .collect::<Result<_>>()?;
    let mut orders = Vec::with_capacity(count);
    for (layer, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => orders.push(o),
            Err(links) => return Ok(LayerVerdict::Cycle { layer, links }),
        }
    }
    Ok(LayerVerdict::Acyclic { orders })
}

/// Kahn's algorithm over the links touched by arcs; on failure, walks
/// predecessors inside the unsorted remainder until a link repeats.
fn topo_or_cycle(cdg: &ChannelDependencyGraph) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = cdg.num_links;
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    let mut used = vec![false; n];
    for &(a, b) in &cdg.arcs {
        succ[a].push(b);
        indeg[b] += 1;
        used[a] = true;
        used[b] = true;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| used[v] && indeg[v] == 0).collect();
    ready.reverse();
    let mut order = Vec::new();
    while let Some(u) = ready.pop() {
        order.push(u);
        for &v in &succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(v);
            }
        }
    }
    if order.len() == used.iter().filter(|&&u| u).count() {
        return Ok(order);
    }
    // every remaining link has a remaining predecessor
    let mut pred = vec![usize::MAX; n];
    for &(a, b) in &cdg.arcs {
        if indeg[a] > 0 && indeg[b] > 0 {
            pred[b] = a;
        }
    }
    let mut v = (0..n).find(|&v| indeg[v] > 0).unwrap();
    let mut pos = HashMap::new();
    let mut walk = Vec::new();
    while !pos.contains_key(&v) {
        pos.insert(v, walk.len());
        walk.push(v);
        v = pred[v];
    }
    let mut cycle = walk[pos[&v]..].to_vec();
    cycle.reverse();
    cycle.push(cycle[0]);
    Err(cycle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    /// Bidirectional 4-ring with two routes whose wrap-around dependencies
    /// close a cycle: 0->1->2->3 and 2->3->0->1.
    fn opposing() -> (Digraph, Vec<Vec<usize>>) {
        let g = gen::gen_torus(&[4], true).unwrap();
        (g, vec![vec![0, 1, 2, 3], vec![2, 3, 0, 1]])
    }

    #[test]
    fn single_route_has_one_dependency() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let cdg = build_cdg(&g, &[vec![0, 1, 2]]).unwrap();
        let (a, b) = (g.find_edge(0, 1).unwrap(), g.find_edge(1, 2).unwrap());
        assert_eq!(cdg.arcs.into_iter().collect::<Vec<_>>(), vec![(a, b)]);
        assert!(build_cdg(&g, &[]).unwrap().arcs.is_empty());
    }

    #[test]
    fn opposing_routes_need_two_layers() {
        let (g, routes) = opposing();
        let cdg = build_cdg(&g, &routes).unwrap();
        assert!(topo_or_cycle(&cdg).is_err());
        let a = lash_sequential(&g, &routes, 8).unwrap();
        assert_eq!(a.count, 2);
        assert!(verify_layers(&g, &routes, &a).unwrap().is_acyclic());
        let flat = LayerAssignment { layers: vec![0, 0], count: 1 };
        let LayerVerdict::Cycle { layer: 0, links } = verify_layers(&g, &routes, &flat).unwrap() else {
            panic!("expected a cycle");
        };
        assert_eq!(links.first(), links.last());
        for w in links.windows(2) {
            assert!(cdg.arcs.contains(&(w[0], w[1])));
        }
        assert!(lash_sequential(&g, &routes, 1).is_err());
    }

    #[test]
    fn acyclic_network_uses_one_layer() {
        let g = Digraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 2, 1.0), (1, 3, 1.0)]).unwrap();
        let routes = vec![vec![0, 1, 2, 3], vec![0, 2, 3], vec![1, 3], vec![0, 1, 3]];
        let a = lash_sequential(&g, &routes, 4).unwrap();
        assert_eq!(a.count, 1);
        assert!(verify_layers(&g, &[], &LayerAssignment { layers: vec![], count: 0 }).unwrap().is_acyclic());
    }

    #[test]
    fn order_is_longest_first() {
        let routes = vec![vec![1, 2], vec![0, 1, 2], vec![0, 2]];
        assert_eq!(lash_order(&routes), vec![1, 2, 0]);
    }
}
