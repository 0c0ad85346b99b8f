//! Lower bounds on all-to-all completion time, equivalently upper bounds on
//! the concurrent flow value `F`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{all_pairs_distances, Digraph, UNREACHABLE};

/// Bounds for an `n`-node graph of out-degree `d` with unit link capacity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub d: usize,
    /// Depth sum of the ideal `d`-ary arborescence on `n` nodes.
    pub tau: u64,
    /// Lower bound on `1 / F`.
    pub time_lb: f64,
    /// `d / tau`.
    pub f_ub_tree: f64,
    /// `d / (n - 1)`: a source must push `n - 1` shards through `d` links.
    pub f_ub_degree: f64,
}

impl BoundReport {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        let tau = tree_distance_sum(d, n)?;
        Ok(BoundReport {
            n,
            d,
            tau,
            time_lb: tau as f64 / d as f64,
            f_ub_tree: d as f64 / tau as f64,
            f_ub_degree: d as f64 / (n - 1) as f64,
        })
    }
}

/// Depth sum over the arborescence that places `min(d^i, remaining)` nodes at
/// depth `i`, filling levels in order.
pub fn tree_distance_sum(d: usize, n: usize) -> Result<u64> {
    if n < 2 || d < 1 {
        return Err(invalid(format!("tree bound needs n >= 2 and d >= 1, got n={n}, d={d}")));
    }
    let (mut left, mut width, mut depth, mut tau) = (n as u64 - 1, 1u64, 0u64, 0u64);
    while left > 0 {
        depth += 1;
        width = width.saturating_mul(d as u64);
        let here = width.min(left);
        tau += here * depth;
        left -= here;
    }
    Ok(tau)
}

/// Depth sum of the full `d`-ary tree with `levels` levels, in closed form;
/// defined for `d >= 2`.
pub fn full_tree_distance_sum(d: u64, levels: u32) -> u64 {
    let k = levels as u64;
    let dk = d.pow(levels);
    (dk * d * (k - 1) + d - dk * k) / ((d - 1) * (d - 1))
}

/// `tau(d, n) / d`: every shard leaving a source travels at least its depth
/// in the ideal tree, and only `d` links leave each node.
pub fn alltoall_time_lower_bound(d: usize, n: usize) -> Result<f64> {
    Ok(tree_distance_sum(d, n)? as f64 / d as f64)
}

/// Sum of all ordered-pair distances over the total link capacity: every
/// unit of flow from `s` to `t` occupies at least `dist(s, t)` capacity.
pub fn graph_distance_bound(g: &Digraph) -> Result<f64> {
    let dist = all_pairs_distances(g)?;
    let mut sum = 0u64;
    for (s, row) in dist.iter().enumerate() {
        for (t, &x) in row.iter().enumerate() {
            if x == UNREACHABLE {
                return Err(Error::Disconnected { from: s, to: t });
            }
            sum += x as u64;
        }
    }
    Ok(sum as f64 / g.total_capacity())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    #[test]
    fn small_trees() {
        assert_eq!(tree_distance_sum(2, 7).unwrap(), 10);
        assert_eq!(tree_distance_sum(2, 4).unwrap(), 4);
        assert_eq!(tree_distance_sum(4, 5).unwrap(), 4);
        assert_eq!(tree_distance_sum(1, 2).unwrap(), 1);
        assert_eq!(alltoall_time_lower_bound(2, 7).unwrap(), 5.0);
        assert!(tree_distance_sum(2, 1).is_err());
    }

    #[test]
    fn closed_form_matches_fill() {
        for d in 2..=8u64 {
            for k in 1..=6u32 {
                let n = (d.pow(k) - 1) / (d - 1);
                if n >= 2 {
                    assert_eq!(full_tree_distance_sum(d, k), tree_distance_sum(d as usize, n as usize).unwrap());
                }
            }
        }
    }

    #[test]
    fn distance_bounds() {
        let ring = gen::gen_torus(&[3], false).unwrap();
        assert!((graph_distance_bound(&ring).unwrap() - 3.0).abs() < 1e-12);
        let t = gen::gen_torus(&[3, 3, 3], true).unwrap();
        assert!((graph_distance_bound(&t).unwrap() - 9.0).abs() < 1e-12);
        let k = gen::gen_complete(5).unwrap();
        assert!((graph_distance_bound(&k).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_orders_upper_bounds() {
        let r = BoundReport::new(4, 100).unwrap();
        assert!(r.f_ub_tree <= r.f_ub_degree && r.f_ub_tree > 0.0);
    }
}
