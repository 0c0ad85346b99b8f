//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::debug;

use crate::model::{LpModel, Sense, Var};
use crate::{LpError, LpSolution, LpStatus, SolveOptions, Solver};

#[derive(Clone, Debug)]
pub struct IlpOptions {
    /// Stop once the incumbent is within a `1 + alpha` factor of the bound.
    pub alpha: f64,
    pub node_limit: usize,
    /// Wall-clock cap on the whole search; checked between nodes.
    pub time_limit: Option<Duration>,
    pub integrality_tol: f64,
    pub lp: SolveOptions,
    pub solver: Solver,
}

impl Default for IlpOptions {
    fn default() -> Self {
        IlpOptions {
            alpha: 0.0,
            node_limit: 200_000,
            time_limit: None,
            integrality_tol: 1e-6,
            lp: SolveOptions::default(),
            solver: Solver::Reference,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IlpReport {
    /// Incumbent; `IterationLimit` or `TimeLimit` status when a limit stopped
    /// the search, with the incumbent (if any) as its point.
    pub solution: LpSolution,
    /// Best proven bound on the optimum, in the model's sense.
    pub bound: f64,
    /// Relative gap `|incumbent - bound| / max(|bound|, 1)`.
    pub gap: f64,
    pub nodes: usize,
}

struct Node {
    // internal minimization key
    key: f64,
    seq: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    sol: LpSolution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest key first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a LpModel,
    opts: &'a IlpOptions,
    sign: f64,
    int_vars: Vec<usize>,
    integral_objective: bool,
    incumbent: Option<(f64, Vec<f64>)>,
    seq: usize,
    lp_solves: usize,
}

/// Solves `model` honoring its integrality flags.
///
/// Variables without the flag stay continuous. When every objective term is
/// an integer coefficient on an integer variable, bounds are rounded up to the
/// next integer before the gap test.
pub fn solve_ilp(model: &LpModel, opts: &IlpOptions) -> Result<IlpReport, LpError> {
    model.validate()?;
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let int_vars: Vec<usize> = (0..model.num_vars()).filter(|&j| model.integrality()[j]).collect();
    let integral_objective = model.objective().iter().enumerate().all(|(j, &c)| {
        c == 0.0 || (model.integrality()[j] && c.fract() == 0.0)
    });
    let mut s = Search {
        model,
        opts,
        sign,
        int_vars,
        integral_objective,
        incumbent: None,
        seq: 0,
        lp_solves: 0,
    };
    s.run()
}

impl Search<'_> {
    fn relax(&mut self, lo: &[f64], hi: &[f64]) -> Result<LpSolution, LpError> {
        let mut m = self.model.clone();
        for j in 0..lo.len() {
            m.set_bounds(Var(j), lo[j], hi[j]);
        }
        self.lp_solves += 1;
        self.opts.solver.solve(&m, &self.opts.lp)
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.int_vars {
            let f = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if f > self.opts.integrality_tol && best.map_or(true, |b| f > b.1 + 1e-12) {
                best = Some((j, f));
            }
        }
        best.map(|b| b.0)
    }

    fn effective_bound(&self, key: f64) -> f64 {
        if self.integral_objective {
            (key - 1e-7).ceil()
        } else {
            key
        }
    }

    fn offer(&mut self, sol: &LpSolution) {
        let mut x = sol.primal.clone();
        for &j in &self.int_vars {
            x[j] = x[j].round();
        }
        if self.model.max_violation(&x) > 1e-6 {
            return;
        }
        let key = self.sign * self.model.evaluate(&x);
        if self.incumbent.as_ref().map_or(true, |inc| key < inc.0 - 1e-12) {
            debug!("new incumbent {}", self.sign * key);
            self.incumbent = Some((key, x));
        }
    }

    fn close_enough(&self, bound_key: f64) -> bool {
        match &self.incumbent {
            None => false,
            Some((inc, _)) => {
                let b = self.effective_bound(bound_key);
                inc - b <= self.opts.alpha * b.abs() + 1e-9
            }
        }
    }

    /// Rounds toward the nearest integer one variable at a time, re-solving
    /// after each fix, to find an early incumbent.
    fn dive(&mut self, mut lo: Vec<f64>, mut hi: Vec<f64>, mut sol: LpSolution) -> Result<(), LpError> {
        for _ in 0..self.int_vars.len() {
            let mut pick: Option<(usize, f64)> = None;
            for &j in &self.int_vars {
                let f = (sol.primal[j] - sol.primal[j].round()).abs();
                if f > self.opts.integrality_tol && pick.map_or(true, |p| f < p.1 - 1e-12) {
                    pick = Some((j, f));
                }
            }
            let Some((j, _)) = pick else {
                self.offer(&sol);
                return Ok(());
            };
            let r = sol.primal[j].round();
            lo[j] = r.max(lo[j]);
            hi[j] = r.min(hi[j]);
            let next = self.relax(&lo, &hi)?;
            if !next.is_optimal() {
                return Ok(());
            }
            sol = next;
        }
        Ok(())
    }

    fn push(&mut self, heap: &mut BinaryHeap<Node>, lo: Vec<f64>, hi: Vec<f64>) -> Result<(), LpError> {
        let sol = self.relax(&lo, &hi)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(()),
            LpStatus::Unbounded => {
                return Err(LpError::InvalidModel("integer program relaxation is unbounded".into()))
            }
            s => return Err(LpError::Backend(format!("relaxation stopped with {s:?}"))),
        }
        let key = self.sign * sol.objective;
        if let Some((inc, _)) = &self.incumbent {
            if self.effective_bound(key) >= *inc - 1e-9 {
                return Ok(());
            }
        }
        if self.most_fractional(&sol.primal).is_none() {
            self.offer(&sol);
            return Ok(());
        }
        self.seq += 1;
        heap.push(Node { key, seq: self.seq, lo, hi, sol });
        Ok(())
    }

    fn run(&mut self) -> Result<IlpReport, LpError> {
        let n = self.model.num_vars();
        let lo0 = self.model.lower().to_vec();
        let hi0 = self.model.upper().to_vec();
        let mut heap = BinaryHeap::new();
        self.push(&mut heap, lo0.clone(), hi0.clone())?;
        if let Some(root) = heap.peek() {
            let (lo, hi, sol) = (root.lo.clone(), root.hi.clone(), root.sol.clone());
            self.dive(lo, hi, sol)?;
        }

        let mut nodes = 0usize;
        let mut bound_key = f64::NEG_INFINITY;
        let mut limited = false;
        let mut timed_out = false;
        let started = Instant::now();
        while let Some(node) = heap.pop() {
            bound_key = node.key;
            if self.close_enough(bound_key) {
                break;
            }
            timed_out = self.opts.time_limit.is_some_and(|t| started.elapsed() >= t);
            if nodes >= self.opts.node_limit || timed_out {
                limited = true;
                heap.push(node);
                break;
            }
            nodes += 1;
            let j = self.most_fractional(&node.sol.primal).expect("queued nodes are fractional");
            let v = node.sol.primal[j];
            let mut hi = node.hi.clone();
            hi[j] = v.floor();
            self.push(&mut heap, node.lo.clone(), hi)?;
            let mut lo = node.lo;
            lo[j] = v.ceil();
            self.push(&mut heap, lo, node.hi)?;
            if nodes % 64 == 0 {
                if let Some(top) = heap.peek() {
                    let (lo, hi, sol) = (top.lo.clone(), top.hi.clone(), top.sol.clone());
                    self.dive(lo, hi, sol)?;
                }
            }
        }
        if heap.is_empty() && !limited {
            // search exhausted: the incumbent is optimal
            if let Some((inc, _)) = &self.incumbent {
                bound_key = *inc;
            }
        }
        let bound_key = self.effective_bound(bound_key).min(
            self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.0),
        );
        debug!("branch-and-bound: {nodes} nodes, {} relaxations", self.lp_solves);

        let bound = self.sign * bound_key;
        let (solution, gap) = match self.incumbent.take() {
            Some((key, x)) => {
                let gap = (key - bound_key).abs() / bound_key.abs().max(1.0);
                let status = match (limited, timed_out) {
                    (false, _) => LpStatus::Optimal,
                    (true, false) => LpStatus::IterationLimit,
                    (true, true) => LpStatus::TimeLimit,
                };
                let sol = LpSolution {
                    status,
                    objective: self.model.evaluate(&x),
                    primal: x,
                    duals: None,
                    iterations: nodes as u64,
                    diagnostics: if limited {
                        format!("stopped after {nodes} nodes, gap {gap:.3e}")
                    } else {
                        String::new()
                    },
                };
                (sol, gap)
            }
            None => {
                let status = match (limited, timed_out) {
                    (false, _) => LpStatus::Infeasible,
                    (true, false) => LpStatus::IterationLimit,
                    (true, true) => LpStatus::TimeLimit,
                };
                (LpSolution::without_point(status, n, nodes as u64, String::new()), f64::INFINITY)
            }
        };
        Ok(IlpReport { solution, bound, gap, nodes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Relation;

    #[test]
    fn knapsack_matches_enumeration() {
        let values = [10.0, 13.0, 7.0];
        let weights = [5.0, 7.0, 4.0];
        let cap = 11.0;
        let mut m = LpModel::new(Sense::Maximize);
        let x: Vec<Var> = values.iter().map(|&v| m.add_integer_var(0.0, 1.0, v)).collect();
        m.add_row(x.iter().zip(weights).map(|(&v, w)| (v, w)).collect(), Relation::Le, cap);
        let r = solve_ilp(&m, &IlpOptions::default()).unwrap();

        let mut best = 0.0f64;
        for mask in 0..8u32 {
            let (mut v, mut w) = (0.0, 0.0);
            for i in 0..3 {
                if mask >> i & 1 == 1 {
                    v += values[i];
                    w += weights[i];
                }
            }
            if w <= cap {
                best = best.max(v);
            }
        }
        assert_eq!(r.solution.status, LpStatus::Optimal);
        assert!((r.solution.objective - best).abs() < 1e-9);
    }

    #[test]
    fn integral_relaxation_is_returned_directly() {
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_integer_var(0.0, 10.0, 1.0);
        let y = m.add_integer_var(0.0, 10.0, 1.0);
        m.add_row(vec![(x, 1.0)], Relation::Le, 3.0);
        m.add_row(vec![(y, 1.0)], Relation::Le, 4.0);
        let r = solve_ilp(&m, &IlpOptions::default()).unwrap();
        assert_eq!(r.nodes, 0);
        assert_eq!(r.solution.primal, vec![3.0, 4.0]);
    }

    #[test]
    fn infeasible_binaries() {
        let mut m = LpModel::new(Sense::Minimize);
        let x = m.add_integer_var(0.0, 1.0, 1.0);
        let y = m.add_integer_var(0.0, 1.0, 1.0);
        m.add_row(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 3.0);
        let r = solve_ilp(&m, &IlpOptions::default()).unwrap();
        assert_eq!(r.solution.status, LpStatus::Infeasible);
    }

    #[test]
    fn alpha_allows_early_stop_within_factor() {
        // min-max assignment of 4 unit jobs to 3 machines: optimum 2, bound 4/3
        let mut m = LpModel::new(Sense::Minimize);
        let t = m.add_integer_var(0.0, 10.0, 1.0);
        let mut x = Vec::new();
        for _ in 0..4 {
            let row: Vec<Var> = (0..3).map(|_| m.add_integer_var(0.0, 1.0, 0.0)).collect();
            m.add_row(row.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
            x.push(row);
        }
        for k in 0..3 {
            let mut row: Vec<(Var, f64)> = x.iter().map(|r| (r[k], 1.0)).collect();
            row.push((t, -1.0));
            m.add_row(row, Relation::Le, 0.0);
        }
        let r = solve_ilp(&m, &IlpOptions::default()).unwrap();
        assert!((r.solution.objective - 2.0).abs() < 1e-9);
        assert!((r.bound - 2.0).abs() < 1e-9);
        let loose = solve_ilp(&m, &IlpOptions { alpha: 0.6, ..Default::default() }).unwrap();
        assert!(loose.solution.objective <= (1.0 + 0.6) * loose.bound + 1e-9);
    }
}
