//! Path sets: enumeration, flow decomposition, routing baselines and load
//! evaluation.

mod baselines;
mod enumerate;
mod extract;
mod ilp;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Digraph;
use crate::mcf::Commodity;

pub use baselines::{dor_routes, ewsp_routes, load_aware_sp, sssp_routes};
pub use enumerate::{disjoint_paths, enum_paths_bounded, shortest_paths, DEFAULT_PATH_CAP};
pub use extract::extract_widest_paths;
pub use ilp::{ilp_min_congestion, IlpRouting};

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPath {
    pub nodes: Vec<usize>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommodityPaths {
    #[serde(rename = "s")]
    pub src: usize,
    #[serde(rename = "d")]
    pub dst: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub demand: f64,
    pub paths: Vec<WeightedPath>,
}

impl CommodityPaths {
    pub fn total_weight(&self) -> f64 {
        self.paths.iter().map(|p| p.weight).sum()
    }
}

/// Weighted paths per commodity; serialized as `{"routes": [...]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedPathSet {
    #[serde(rename = "routes")]
    pub entries: Vec<CommodityPaths>,
}

impl WeightedPathSet {
    pub fn commodities(&self) -> Vec<Commodity> {
        self.entries.iter().map(|e| Commodity { src: e.src, dst: e.dst, demand: e.demand }).collect()
    }

    pub fn num_paths(&self) -> usize {
        self.entries.iter().map(|e| e.paths.len()).sum()
    }

    /// Every path's node sequence, commodity-major.
    pub fn all_paths(&self) -> Vec<Vec<usize>> {
        self.entries.iter().flat_map(|e| e.paths.iter().map(|p| p.nodes.clone())).collect()
    }

    /// Same paths with every weight set to `w`.
    pub fn with_uniform_weight(&self, w: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            for p in &mut e.paths {
                p.weight = w;
            }
        }
        out
    }

    /// Checks every path: starts at `s`, ends at `d`, simple, edges exist,
    /// weights non-negative, positive total per commodity.
    pub fn validate(&self, g: &Digraph) -> Result<()> {
        for e in &self.entries {
            for p in &e.paths {
                if p.nodes.first() != Some(&e.src) || p.nodes.last() != Some(&e.dst) {
                    return Err(invalid(format!("path {:?} does not join {} to {}", p.nodes, e.src, e.dst)));
                }
                if !is_simple(&p.nodes) {
                    return Err(invalid(format!("path {:?} revisits a node", p.nodes)));
                }
                if !(p.weight >= 0.0) {
                    return Err(invalid(format!("path {:?} has weight {}", p.nodes, p.weight)));
                }
                path_edges(g, &p.nodes)?;
            }
            if !(e.total_weight() > 0.0) {
                return Err(invalid(format!("commodity ({}, {}) has no positive weight", e.src, e.dst)));
            }
        }
        Ok(())
    }
}

/// One path per commodity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteTable {
    pub routes: Vec<Route>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    #[serde(rename = "s")]
    pub src: usize,
    #[serde(rename = "d")]
    pub dst: usize,
    pub nodes: Vec<usize>,
}

impl RouteTable {
    pub fn to_pathset(&self) -> WeightedPathSet {
        WeightedPathSet {
            entries: self
                .routes
                .iter()
                .map(|r| CommodityPaths {
                    src: r.src,
                    dst: r.dst,
                    demand: 1.0,
                    paths: vec![WeightedPath { nodes: r.nodes.clone(), weight: 1.0 }],
                })
                .collect(),
        }
    }

    pub fn paths(&self) -> Vec<Vec<usize>> {
        self.routes.iter().map(|r| r.nodes.clone()).collect()
    }
}

pub fn is_simple(nodes: &[usize]) -> bool {
    let mut seen: Vec<usize> = nodes.to_vec();
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}

/// Edge ids along a node sequence.
pub fn path_edges(g: &Digraph, nodes: &[usize]) -> Result<Vec<usize>> {
    nodes
        .windows(2)
        .map(|w| {
            if w[0] >= g.n() || w[1] >= g.n() {
                return Err(invalid(format!("path {nodes:?} leaves the graph")));
            }
            g.find_edge(w[0], w[1])
                .ok_or_else(|| invalid(format!("path {nodes:?} uses missing link {}->{}", w[0], w[1])))
        })
        .collect()
}

/// Per-link load of a path set, each commodity normalized to its demand.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkLoad {
    /// Largest load divided by capacity.
    pub max_load: f64,
    /// Absolute load per edge id.
    pub per_edge: Vec<f64>,
}

/// Load when every commodity ships `demand` units split across its paths in
/// proportion to their weights (a route table ships one unit per route).
pub fn eval_link_load(g: &Digraph, set: &WeightedPathSet) -> Result<LinkLoad> {
    let mut per_edge = vec![0.0; g.num_edges()];
    for e in &set.entries {
        let total = e.total_weight();
        if !(total > 0.0) {
            return Err(invalid(format!("commodity ({}, {}) has zero total weight", e.src, e.dst)));
        }
        for p in &e.paths {
            let share = e.demand * p.weight / total;
            for id in path_edges(g, &p.nodes)? {
                per_edge[id] += share;
            }
        }
    }
    let max_load = per_edge
        .iter()
        .enumerate()
        .map(|(id, &l)| l / g.edge(id).cap)
        .fold(0.0, f64::max);
    Ok(LinkLoad { max_load, per_edge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    #[test]
    fn empty_set_has_zero_load() {
        let g = gen::gen_torus(&[3], false).unwrap();
        assert_eq!(eval_link_load(&g, &WeightedPathSet::default()).unwrap().max_load, 0.0);
    }

    #[test]
    fn missing_edge_is_rejected() {
        let g = gen::gen_torus(&[3], false).unwrap();
        assert!(path_edges(&g, &[0, 2]).is_err());
        assert_eq!(path_edges(&g, &[0, 1, 2]).unwrap().len(), 2);
    }

    #[test]
    fn json_shape() {
        let set = WeightedPathSet {
            entries: vec![CommodityPaths {
                src: 0,
                dst: 1,
                demand: 1.0,
                paths: vec![WeightedPath { nodes: vec![0, 1], weight: 0.5 }],
            }],
        };
        let v = serde_json::to_value(&set).unwrap();
        assert_eq!(v, serde_json::json!({"routes": [{"s": 0, "d": 1, "paths": [{"nodes": [0, 1], "weight": 0.5}]}]}));
    }
}
