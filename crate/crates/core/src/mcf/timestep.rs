//! Time-stepped MCF on the time-expanded graph.
//!
//! Link `(u, v)` at step `t` carries data from `u` at time `t - 1` to `v` at
//! time `t`; data may wait at a node between steps (the unbounded self-edges
//! of the stacked graph are implicit in the cumulative conservation rows).

use a2a_lp::{LpModel, Relation, Sense, Var};
use serde::{Deserialize, Serialize};

use super::{all_to_all, solve_checked, validate_commodities, Commodity, McfOptions};
use crate::error::{invalid, Error, Result};
use crate::graph::{all_pairs_distances, Digraph};

/// Per-step utilization bounds and per-step flows, each commodity moving one
/// unit shard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeExpandedSolution {
    pub l_max: usize,
    /// `u[t - 1]` bounds the load of every link at step `t`, in units of its capacity.
    pub u: Vec<f64>,
    pub commodities: Vec<Commodity>,
    /// `(edge id, step, fraction of the shard)` per commodity; steps are `1..=l_max`.
    pub flows: Vec<Vec<(usize, usize, f64)>>,
}

impl TimeExpandedSolution {
    pub fn total_u(&self) -> f64 {
        self.u.iter().sum()
    }

    /// Largest violation of the capacity, cumulative conservation, flow
    /// balance, unit demand and bound constraints.
    pub fn max_violation(&self, g: &Digraph) -> f64 {
        let l = self.l_max;
        let mut worst: f64 = 0.0;
        let mut load = vec![0.0; g.num_edges() * l];
        for (k, c) in self.commodities.iter().enumerate() {
            // out[u][t], in[u][t]
            let mut out = vec![0.0; g.n() * (l + 1)];
            let mut inn = vec![0.0; g.n() * (l + 1)];
            for &(e, t, x) in &self.flows[k] {
                worst = worst.max(-x).max(x - 1.0);
                load[e * l + t - 1] += x;
                let edge = g.edge(e);
                out[edge.src * (l + 1) + t] += x;
                inn[edge.dst * (l + 1) + t] += x;
            }
            for u in 0..g.n() {
                let row = |a: &Vec<f64>, upto: usize| -> f64 { (1..=upto).map(|t| a[u * (l + 1) + t]).sum() };
                if u == c.src {
                    worst = worst.max((row(&out, l) - 1.0).abs());
                } else if u == c.dst {
                    worst = worst.max((row(&inn, l) - 1.0).abs());
                } else {
                    for t in 1..=l {
                        worst = worst.max(row(&out, t) - row(&inn, t - 1));
                    }
                    worst = worst.max((row(&out, l) - row(&inn, l)).abs());
                }
            }
        }
        for e in 0..g.num_edges() {
            for t in 1..=l {
                worst = worst.max(load[e * l + t - 1] - self.u[t - 1] * g.edge(e).cap);
            }
        }
        worst
    }
}

/// Minimizes the summed per-step utilization `sum_t U_t` over `l_max` steps.
pub fn mcf_timestepped(g: &Digraph, l_max: usize, commodities: Option<&[Commodity]>, opts: &McfOptions) -> Result<TimeExpandedSolution> {
    let commodities = commodities.map_or_else(|| all_to_all(g.n()), <[Commodity]>::to_vec);
    validate_commodities(g, &commodities)?;
    if l_max == 0 {
        return Err(invalid("l_max must be at least 1"));
    }
    let dist = all_pairs_distances(g)?;
    if let Some(c) = commodities.iter().find(|c| dist[c.src][c.dst] as usize > l_max) {
        return Err(Error::Infeasible(format!(
            "l_max={l_max} is below the distance {} from {} to {}",
            dist[c.src][c.dst], c.src, c.dst
        )));
    }
    let l = l_max;
    let m = g.num_edges();

    let mut lp = LpModel::new(Sense::Minimize);
    let u: Vec<Var> = (0..l).map(|_| lp.add_var(0.0, f64::INFINITY, 1.0)).collect();
    let mut cap_rows: Vec<Vec<(Var, f64)>> = vec![Vec::new(); m * l];
    let mut vars = Vec::with_capacity(commodities.len());
    for c in &commodities {
        let (s, d) = (c.src, c.dst);
        // out_terms[u][t], in_terms[u][t]
        let mut out_terms: Vec<Vec<Vec<Var>>> = vec![vec![Vec::new(); l + 1]; g.n()];
        let mut in_terms: Vec<Vec<Vec<Var>>> = vec![vec![Vec::new(); l + 1]; g.n()];
        let mut mine = Vec::new();
        for (e, edge) in g.edges().iter().enumerate() {
            if edge.src == edge.dst || edge.dst == s || edge.src == d {
                continue;
            }
            for t in 1..=l {
                // reachable in time and still able to arrive in time
                if dist[s][edge.src] as usize > t - 1 || dist[edge.dst][d] as usize > l - t {
                    continue;
                }
                let x = lp.add_var(0.0, 1.0, 0.0);
                mine.push((e, t, x));
                cap_rows[e * l + t - 1].push((x, 1.0));
                out_terms[edge.src][t].push(x);
                in_terms[edge.dst][t].push(x);
            }
        }
        for w in 0..g.n() {
            if w == s || w == d {
                continue;
            }
            for t in 2..=l {
                if out_terms[w][..=t].iter().all(Vec::is_empty) {
                    continue;
                }
                let mut row: Vec<(Var, f64)> = Vec::new();
                for tt in 1..=t {
                    row.extend(out_terms[w][tt].iter().map(|&x| (x, 1.0)));
                }
                for tt in 1..t {
                    row.extend(in_terms[w][tt].iter().map(|&x| (x, -1.0)));
                }
                lp.add_row(row, Relation::Le, 0.0);
            }
            let mut bal: Vec<(Var, f64)> = Vec::new();
            for t in 1..=l {
                bal.extend(out_terms[w][t].iter().map(|&x| (x, 1.0)));
                bal.extend(in_terms[w][t].iter().map(|&x| (x, -1.0)));
            }
            if !bal.is_empty() {
                lp.add_row(bal, Relation::Eq, 0.0);
            }
        }
        let sent: Vec<(Var, f64)> = out_terms[s].iter().flatten().map(|&x| (x, 1.0)).collect();
        let got: Vec<(Var, f64)> = in_terms[d].iter().flatten().map(|&x| (x, 1.0)).collect();
        lp.add_row(sent, Relation::Eq, c.demand);
        lp.add_row(got, Relation::Eq, c.demand);
        vars.push(mine);
    }
    for e in 0..m {
        for t in 1..=l {
            let mut row = std::mem::take(&mut cap_rows[e * l + t - 1]);
            if row.is_empty() {
                continue;
            }
            row.push((u[t - 1], -g.edge(e).cap));
            lp.add_row(row, Relation::Le, 0.0);
        }
    }

    let sol = solve_checked(&opts.solver, &lp, &opts.lp, "time-stepped MCF")?;
    let flows = vars
        .iter()
        .map(|mine| {
            mine.iter()
                .map(|&(e, t, x)| (e, t, sol.primal[x.0].clamp(0.0, 1.0)))
                .filter(|&(_, _, v)| v > 1e-12)
                .collect()
        })
        .collect();
    Ok(TimeExpandedSolution {
        l_max,
        u: u.iter().map(|v| sol.primal[v.0].max(0.0)).collect(),
        commodities,
        flows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    #[test]
    fn ring_of_three_needs_three_units() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let ts = mcf_timestepped(&g, 2, None, &McfOptions::default()).unwrap();
        assert!((ts.total_u() - 3.0).abs() < 1e-9, "{:?}", ts.u);
        assert!(ts.max_violation(&g) < 1e-9);
    }

    #[test]
    fn below_diameter_is_infeasible() {
        let g = gen::gen_torus(&[3], false).unwrap();
        assert!(matches!(mcf_timestepped(&g, 1, None, &McfOptions::default()), Err(Error::Infeasible(_))));
    }
}
