use a2a_lp::{LpModel, Relation, Sense, Var};

use super::{solve_checked, validate_commodities, McfOptions};
use crate::error::{invalid, Result};
use crate::graph::Digraph;
use crate::routes::{path_edges, WeightedPathSet};

/// Path-based maximum concurrent flow restricted to the paths in `pathset`.
///
/// Returns `F` and the same path set with optimal per-path rates as weights.
pub fn mcf_path(g: &Digraph, pathset: &WeightedPathSet, opts: &McfOptions) -> Result<(f64, WeightedPathSet)> {
    let commodities = pathset.commodities();
    validate_commodities(g, &commodities)?;
    let mut lp = LpModel::new(Sense::Maximize);
    let f = lp.add_var(0.0, f64::INFINITY, 1.0);
    let mut cap_rows: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.num_edges()];
    let mut vars: Vec<Vec<Var>> = Vec::with_capacity(pathset.entries.len());
    for entry in &pathset.entries {
        if entry.paths.is_empty() {
            return Err(invalid(format!("commodity ({}, {}) has no paths", entry.src, entry.dst)));
        }
        let mut mine = Vec::with_capacity(entry.paths.len());
        let mut demand: Vec<(Var, f64)> = Vec::new();
        for p in &entry.paths {
            let edges = path_edges(g, &p.nodes)?;
            let x = lp.add_var(0.0, f64::INFINITY, 0.0);
            for e in edges {
                cap_rows[e].push((x, 1.0));
            }
            demand.push((x, -1.0));
            mine.push(x);
        }
        demand.push((f, entry.demand));
        lp.add_row(demand, Relation::Le, 0.0);
        vars.push(mine);
    }
    for (e, row) in cap_rows.into_iter().enumerate() {
        if !row.is_empty() {
            lp.add_row(row, Relation::Le, g.edge(e).cap);
        }
    }
    let sol = solve_checked(&opts.solver, &lp, &opts.lp, "path MCF")?;
    let mut out = pathset.clone();
    for (entry, mine) in out.entries.iter_mut().zip(&vars) {
        for (p, x) in entry.paths.iter_mut().zip(mine) {
            p.weight = sol.primal[x.0].max(0.0);
        }
    }
    Ok((sol.primal[f.0], out))
}
