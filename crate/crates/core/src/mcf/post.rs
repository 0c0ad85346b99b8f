//! Cleanup of LP flows: cycle cancellation and the destination-to-source
//! pass that turns conservation inequalities into exact equalities.

use crate::error::{Error, Result};
use crate::graph::Digraph;

const ZERO: f64 = 1e-12;

fn dense(g: &Digraph, flows: &[(usize, f64)]) -> Vec<f64> {
    let mut x = vec![0.0; g.num_edges()];
    for &(e, v) in flows {
        if v > ZERO {
            x[e] += v;
        }
    }
    x
}

fn sparse(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter().enumerate().filter(|(_, &v)| v > ZERO).map(|(e, &v)| (e, v)).collect()
}

/// Edge ids of some directed cycle in the support of `x`.
fn find_cycle(g: &Digraph, x: &[f64]) -> Option<Vec<usize>> {
    let n = g.n();
    let mut state = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, g.out_range(root).start)];
        state[root] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            let end = g.out_range(u).end;
            let mut pushed = false;
            while *next < end {
                let e = *next;
                *next += 1;
                if x[e] <= ZERO {
                    continue;
                }
                let v = g.edge(e).dst;
                match state[v] {
                    0 => {
                        state[v] = 1;
                        parent[v] = e;
                        stack.push((v, g.out_range(v).start));
                        pushed = true;
                        break;
                    }
                    1 => {
                        let mut cycle = vec![e];
                        let mut w = u;
                        while w != v {
                            let pe = parent[w];
                            cycle.push(pe);
                            w = g.edge(pe).src;
                        }
                        return Some(cycle);
                    }
                    _ => {}
                }
            }
            if !pushed {
                state[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Removes circulations from one commodity's flow (self-loops included).
pub fn cancel_cycles(g: &Digraph, flows: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut x = dense(g, flows);
    for (e, edge) in g.edges().iter().enumerate() {
        if edge.src == edge.dst {
            x[e] = 0.0;
        }
    }
    while let Some(cycle) = find_cycle(g, &x) {
        let m = cycle.iter().map(|&e| x[e]).fold(f64::INFINITY, f64::min);
        for &e in &cycle {
            x[e] -= m;
            if x[e] <= ZERO {
                x[e] = 0.0;
            }
        }
    }
    sparse(&x)
}

/// Acyclic flow from `src` that delivers exactly `target` to `dst` and
/// conserves flow exactly at every other node.
///
/// Input flow only needs to satisfy `outflow <= inflow` at intermediate nodes
/// and deliver at least `target` (up to a relative 1e-6). Working back from
/// the destination, each node's in-links are scaled so they carry exactly what
/// the node forwards.
pub fn conservative_flows(g: &Digraph, src: usize, dst: usize, flows: &[(usize, f64)], target: f64) -> Result<Vec<(usize, f64)>> {
    let mut x = dense(g, &cancel_cycles(g, flows));
    let n = g.n();

    let mut indeg = vec![0usize; n];
    for (e, &v) in x.iter().enumerate() {
        if v > 0.0 {
            indeg[g.edge(e).dst] += 1;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&u| indeg[u] == 0).collect();
    while let Some(u) = ready.pop() {
        order.push(u);
        for e in g.out_range(u) {
            if x[e] > 0.0 {
                let v = g.edge(e).dst;
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(v);
                }
            }
        }
    }
    debug_assert_eq!(order.len(), n, "support is acyclic after cancellation");

    let mut need = vec![0.0; n];
    need[dst] = target;
    for &v in order.iter().rev() {
        if v == src {
            continue;
        }
        let ins: Vec<usize> = g.in_edge_ids(v).iter().copied().filter(|&e| x[e] > 0.0).collect();
        let inflow: f64 = ins.iter().map(|&e| x[e]).sum();
        if need[v] <= 0.0 {
            for &e in &ins {
                x[e] = 0.0;
            }
            continue;
        }
        // Solver noise can leave a negligible out-flow at a node nothing reaches.
        if inflow <= 0.0 && need[v] <= 1e-9 * target {
            for e in g.out_range(v) {
                x[e] = 0.0;
            }
            continue;
        }
        if inflow < need[v] * (1.0 - 1e-6) {
            return Err(Error::Infeasible(format!(
                "commodity ({src},{dst}): node {v} receives {inflow:.3e} but must forward {:.3e}",
                need[v]
            )));
        }
        let scale = need[v] / inflow;
        for &e in &ins {
            x[e] *= scale;
            need[g.edge(e).src] += x[e];
        }
    }
    for e in 0..x.len() {
        if g.edge(e).dst == src {
            x[e] = 0.0;
        }
    }
    Ok(sparse(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Digraph {
        // 0->1->3, 0->2->3, plus 1<->2
        Digraph::from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 1, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn cycles_are_cancelled() {
        let g = diamond();
        let e = |u, v| g.find_edge(u, v).unwrap();
        let flows = vec![(e(0, 1), 0.5), (e(1, 2), 0.3), (e(2, 1), 0.3), (e(1, 3), 0.5)];
        let out = cancel_cycles(&g, &flows);
        assert_eq!(out, vec![(e(0, 1), 0.5), (e(1, 3), 0.5)]);
    }

    #[test]
    fn surplus_is_trimmed_to_exact_conservation() {
        let g = diamond();
        let e = |u, v| g.find_edge(u, v).unwrap();
        // node 2 receives 0.6 but forwards 0.4; destination gets 0.9 > 0.8
        let flows = vec![(e(0, 1), 0.5), (e(0, 2), 0.6), (e(1, 3), 0.5), (e(2, 3), 0.4)];
        let out = conservative_flows(&g, 0, 3, &flows, 0.8).unwrap();
        let get = |u, v| out.iter().find(|p| p.0 == e(u, v)).map_or(0.0, |p| p.1);
        let into3 = get(1, 3) + get(2, 3);
        assert!((into3 - 0.8).abs() < 1e-15);
        assert!((get(0, 1) - get(1, 3)).abs() < 1e-15);
        assert!((get(0, 2) - get(2, 3)).abs() < 1e-15);
    }

    #[test]
    fn stranded_noise_is_dropped() {
        let g = diamond();
        let e = |u, v| g.find_edge(u, v).unwrap();
        // node 2 forwards 2e-12 it never receives
        let flows = vec![(e(0, 1), 0.8), (e(1, 3), 0.8), (e(2, 3), 2e-12)];
        let out = conservative_flows(&g, 0, 3, &flows, 0.8).unwrap();
        assert!(out.iter().all(|p| p.0 != e(2, 3)));
        let into3: f64 = out.iter().filter(|p| g.edge(p.0).dst == 3).map(|p| p.1).sum();
        assert!((into3 - 0.8).abs() < 1e-9);
    }

    #[test]
    fn shortfall_is_an_error() {
        let g = diamond();
        let e = |u, v| g.find_edge(u, v).unwrap();
        let flows = vec![(e(0, 1), 0.5), (e(1, 3), 0.5)];
        assert!(conservative_flows(&g, 0, 3, &flows, 0.8).is_err());
    }
}
