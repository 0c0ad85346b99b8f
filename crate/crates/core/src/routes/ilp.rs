use a2a_lp::{solve_ilp, IlpOptions, IlpReport, LpModel, Relation, Sense, Var};

use super::{path_edges, Route, RouteTable, WeightedPathSet};
use crate::error::{invalid, Error, Result};
use crate::graph::Digraph;

/// Outcome of minimum-congestion single-path selection.
#[derive(Clone, Debug)]
pub struct IlpRouting {
    pub table: RouteTable,
    /// Maximum normalized link load of `table`.
    pub max_load: f64,
    /// Lower bound proven by branch-and-bound.
    pub bound: f64,
    pub nodes: usize,
    /// False when the node limit stopped the search early.
    pub complete: bool,
}

/// Chooses one path per commodity from `pathset` minimizing the maximum
/// normalized link load, to within a `1 + alpha` factor of the proven bound.
pub fn ilp_min_congestion(g: &Digraph, pathset: &WeightedPathSet, alpha: f64, opts: &IlpOptions) -> Result<IlpRouting> {
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    let unit = g.edges().iter().all(|e| e.cap == 1.0) && pathset.entries.iter().all(|e| e.demand == 1.0);
    let mut lp = LpModel::new(Sense::Minimize);
    // integral when every load is a count of unit routes
    let load = if unit {
        lp.add_integer_var(0.0, f64::INFINITY, 1.0)
    } else {
        lp.add_var(0.0, f64::INFINITY, 1.0)
    };
    let mut rows: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.num_edges()];
    let mut vars = Vec::with_capacity(pathset.entries.len());
    for entry in &pathset.entries {
        if entry.paths.is_empty() {
            return Err(invalid(format!("commodity ({}, {}) has no candidate paths", entry.src, entry.dst)));
        }
        let mut pick = Vec::new();
        let mut mine = Vec::new();
        for p in &entry.paths {
            let x = lp.add_integer_var(0.0, 1.0, 0.0);
            for e in path_edges(g, &p.nodes)? {
                rows[e].push((x, entry.demand));
            }
            pick.push((x, 1.0));
            mine.push(x);
        }
        lp.add_row(pick, Relation::Eq, 1.0);
        vars.push(mine);
    }
    for (e, mut row) in rows.into_iter().enumerate() {
        if !row.is_empty() {
            row.push((load, -g.edge(e).cap));
            lp.add_row(row, Relation::Le, 0.0);
        }
    }
    let report: IlpReport = solve_ilp(&lp, &IlpOptions { alpha, ..opts.clone() })?;
    let sol = &report.solution;
    // no incumbent: either none exists or the search stopped first
    if report.gap.is_infinite() {
        return match sol.status {
            a2a_lp::LpStatus::Infeasible => Err(Error::Infeasible("no single-path selection exists".into())),
            status => Err(Error::Solve {
                what: "minimum-congestion path selection".into(),
                status,
                detail: format!(" after {} nodes without an incumbent", report.nodes),
            }),
        };
    }
    let mut routes = Vec::with_capacity(vars.len());
    for (entry, mine) in pathset.entries.iter().zip(&vars) {
        let k = mine
            .iter()
            .position(|x| sol.primal[x.0] > 0.5)
            .ok_or_else(|| Error::Infeasible(format!("no path chosen for ({}, {})", entry.src, entry.dst)))?;
        routes.push(Route { src: entry.src, dst: entry.dst, nodes: entry.paths[k].nodes.clone() });
    }
    let table = RouteTable { routes };
    let max_load = super::eval_link_load(g, &table.to_pathset())?.max_load;
    Ok(IlpRouting {
        table,
        max_load,
        bound: report.bound,
        nodes: report.nodes,
        complete: sol.status == a2a_lp::LpStatus::Optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;
    use crate::routes::disjoint_paths;

    #[test]
    fn ring_assignment_is_forced() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let paths = disjoint_paths(&g).unwrap();
        let r = ilp_min_congestion(&g, &paths, 0.0, &IlpOptions::default()).unwrap();
        assert_eq!(r.max_load, 3.0);
        assert!(r.complete);
    }
}
