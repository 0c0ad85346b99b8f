use a2a_lp::{LpModel, Relation, Sense, Var};
use log::warn;

use super::{all_to_all, post, solve_checked, validate_commodities, Commodity, LinkFlowSolution, McfOptions};
use crate::error::{invalid, Result};
use crate::graph::Digraph;

/// Link-based maximum concurrent flow.
///
/// `maximize F` subject to link capacities, `outflow <= inflow` at every
/// intermediate node and `inflow(dst) >= F * demand` per commodity. The LP's
/// flows are then cycle-cancelled and trimmed to exact conservation.
pub fn mcf_link(g: &Digraph, commodities: Option<&[Commodity]>, opts: &McfOptions) -> Result<LinkFlowSolution> {
    let owned;
    let commodities = match commodities {
        Some(c) => c,
        None => {
            owned = all_to_all(g.n());
            &owned
        }
    };
    validate_commodities(g, commodities)?;
    if g.n() > 400 && !opts.force {
        return Err(invalid(format!(
            "link MCF on {} nodes needs O(N^3) variables; use the decomposed solver or force",
            g.n()
        )));
    }
    if g.n() > 150 {
        warn!("link MCF on {} nodes: the model is very large", g.n());
    }

    let mut lp = LpModel::new(Sense::Maximize);
    let f = lp.add_var(0.0, f64::INFINITY, 1.0);
    let mut cap_rows: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.num_edges()];
    let mut vars: Vec<Vec<(usize, Var)>> = Vec::with_capacity(commodities.len());
    let mut node_terms: Vec<Vec<(Var, f64)>> = vec![Vec::new(); g.n()];
    for c in commodities {
        for t in node_terms.iter_mut() {
            t.clear();
        }
        let mut mine = Vec::new();
        for (e, edge) in g.edges().iter().enumerate() {
            if edge.src == edge.dst || edge.dst == c.src || edge.src == c.dst {
                continue;
            }
            let x = lp.add_var(0.0, f64::INFINITY, 0.0);
            mine.push((e, x));
            cap_rows[e].push((x, 1.0));
            node_terms[edge.src].push((x, 1.0));
            node_terms[edge.dst].push((x, -1.0));
        }
        for (u, terms) in node_terms.iter_mut().enumerate() {
            if u == c.src || terms.is_empty() {
                continue;
            }
            let mut row = std::mem::take(terms);
            if u == c.dst {
                row.push((f, c.demand));
            }
            lp.add_row(row, Relation::Le, 0.0);
        }
        vars.push(mine);
    }
    for (e, row) in cap_rows.into_iter().enumerate() {
        if !row.is_empty() {
            lp.add_row(row, Relation::Le, g.edge(e).cap);
        }
    }

    let sol = solve_checked(&opts.solver, &lp, &opts.lp, "link MCF")?;
    let fval = sol.primal[f.0];
    let mut flows = Vec::with_capacity(commodities.len());
    for (c, mine) in commodities.iter().zip(&vars) {
        let raw: Vec<(usize, f64)> = mine.iter().map(|&(e, x)| (e, sol.primal[x.0])).collect();
        flows.push(post::conservative_flows(g, c.src, c.dst, &raw, fval * c.demand)?);
    }
    Ok(LinkFlowSolution { f: fval, commodities: commodities.to_vec(), flows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    #[test]
    fn unidirectional_ring_of_three() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let s = mcf_link(&g, None, &McfOptions::default()).unwrap();
        assert!((s.f - 1.0 / 3.0).abs() < 1e-9);
        let check = s.check(&g);
        assert!(check.within(1e-9), "{check:?}");
    }

    #[test]
    fn two_node_two_link_equals_min_cut() {
        let g = Digraph::from_edges(2, [(0, 1, 2.0), (1, 0, 0.5)]).unwrap();
        let s = mcf_link(&g, None, &McfOptions::default()).unwrap();
        assert!((s.f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn capacity_scaling() {
        let g = gen::gen_torus(&[3], false).unwrap().scaled(2.0).unwrap();
        let s = mcf_link(&g, None, &McfOptions::default()).unwrap();
        assert!((s.f - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn disconnected_is_reported() {
        let g = Digraph::from_edges(3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(mcf_link(&g, None, &McfOptions::default()).is_err());
    }
}
