//! Reference bounded revised simplex.
//!
//! Every row `i` gets a logical variable `s_i = a_i x` whose bounds encode the
//! row relation, so the working system is `[A  -I] (x, s) = 0` with all
//! variables boxed (possibly by infinities). The slack basis is always a valid
//! start; primal infeasibility is driven out with a composite phase-1 cost
//! before the true objective is optimized. Pricing is Dantzig over a rotating
//! window with a Bland's-rule fallback after a run of degenerate pivots; the
//! ratio test is the Harris two-pass test. Everything is deterministic.

use std::time::Instant;

use log::debug;

use crate::lu::BasisFactor;
use crate::model::{LpModel, Relation, Sense};
use crate::{LpError, LpSolution, LpStatus, SolveOptions};

const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    Free,
}

struct Simplex<'a> {
    opts: &'a SolveOptions,
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    factor: BasisFactor,
    price_cursor: usize,
    iterations: u64,
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    Limit(LpStatus),
}

/// Solves `model` with the reference revised simplex.
pub fn solve_lp(model: &LpModel, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    model.validate()?;
    let n = model.num_vars();
    let m = model.num_rows();
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
    for (i, row) in model.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            match cols[j].last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => cols[j].push((i, a)),
            }
        }
    }
    for col in cols.iter_mut().take(n) {
        col.retain(|e| e.1 != 0.0);
    }
    for i in 0..m {
        cols[n + i].push((i, -1.0));
    }

    let mut cost = vec![0.0; n + m];
    for (j, &c) in model.objective().iter().enumerate() {
        cost[j] = sign * c;
    }
    let mut lo = model.lower().to_vec();
    let mut hi = model.upper().to_vec();
    for row in model.rows() {
        let (l, h) = match row.relation {
            Relation::Le => (f64::NEG_INFINITY, row.rhs),
            Relation::Ge => (row.rhs, f64::INFINITY),
            Relation::Eq => (row.rhs, row.rhs),
        };
        lo.push(l);
        hi.push(h);
    }

    let mut x = vec![0.0; n + m];
    let mut state = vec![State::Free; n + m];
    for j in 0..n {
        if lo[j].is_finite() {
            x[j] = lo[j];
            state[j] = State::Lower;
        } else if hi[j].is_finite() {
            x[j] = hi[j];
            state[j] = State::Upper;
        }
    }
    let basis: Vec<usize> = (n..n + m).collect();
    for (p, &v) in basis.iter().enumerate() {
        state[v] = State::Basic(p);
    }
    let basis_cols: Vec<Vec<(usize, f64)>> = basis.iter().map(|&v| cols[v].clone()).collect();
    let factor = BasisFactor::factorize(m, &basis_cols)
        .map_err(|_| LpError::InvalidModel("slack basis is singular".into()))?;

    let mut s = Simplex {
        opts,
        n,
        m,
        cols,
        cost,
        lo,
        hi,
        x,
        state,
        basis,
        factor,
        price_cursor: 0,
        iterations: 0,
    };
    s.recompute_basics();
    let outcome = s.run();

    let primal: Vec<f64> = s.x[..n].to_vec();
    let sol = match outcome {
        Outcome::Optimal => {
            let duals = opts.compute_duals.then(|| {
                let mut cb: Vec<f64> = s.basis.iter().map(|&v| s.cost[v]).collect();
                s.factor.btran(&mut cb);
                cb.into_iter().map(|y| sign * y).collect()
            });
            LpSolution {
                status: LpStatus::Optimal,
                objective: model.evaluate(&primal),
                primal,
                duals,
                iterations: s.iterations,
                diagnostics: String::new(),
            }
        }
        Outcome::Infeasible => LpSolution::without_point(
            LpStatus::Infeasible,
            n,
            s.iterations,
            format!("phase 1 ended with infeasibility {:.3e}", s.infeasibility()),
        ),
        Outcome::Unbounded => {
            LpSolution::without_point(LpStatus::Unbounded, n, s.iterations, String::new())
        }
        Outcome::Limit(status) => LpSolution {
            status,
            objective: model.evaluate(&primal),
            primal,
            duals: None,
            iterations: s.iterations,
            diagnostics: format!(
                "stopped after {} pivots, primal infeasibility {:.3e}",
                s.iterations,
                s.infeasibility()
            ),
        },
    };
    Ok(sol)
}

impl Simplex<'_> {
    fn ftol(&self) -> f64 {
        self.opts.tolerances.feasibility
    }

    fn recompute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if matches!(self.state[j], State::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for &(i, a) in &self.cols[j] {
                rhs[i] -= a * self.x[j];
            }
        }
        self.factor.ftran(&mut rhs);
        for (p, &v) in self.basis.iter().enumerate() {
            self.x[v] = rhs[p];
        }
    }

    fn refactor(&mut self) {
        loop {
            let basis_cols: Vec<Vec<(usize, f64)>> =
                self.basis.iter().map(|&v| self.cols[v].clone()).collect();
            match BasisFactor::factorize(self.m, &basis_cols) {
                Ok(f) => {
                    self.factor = f;
                    break;
                }
                Err(sing) => {
                    debug!("singular basis, swapping in {} logicals", sing.rows.len());
                    for (&r, &p) in sing.rows.iter().zip(&sing.cols) {
                        let out = self.basis[p];
                        self.state[out] = self.nonbasic_state(out);
                        self.x[out] = self.nonbasic_value(out);
                        let logical = self.n + r;
                        self.basis[p] = logical;
                        self.state[logical] = State::Basic(p);
                    }
                }
            }
        }
        self.recompute_basics();
    }

    fn nonbasic_state(&self, v: usize) -> State {
        let (l, h, x) = (self.lo[v], self.hi[v], self.x[v]);
        match (l.is_finite(), h.is_finite()) {
            (true, true) => {
                if (x - l).abs() <= (x - h).abs() {
                    State::Lower
                } else {
                    State::Upper
                }
            }
            (true, false) => State::Lower,
            (false, true) => State::Upper,
            (false, false) => State::Free,
        }
    }

    fn nonbasic_value(&self, v: usize) -> f64 {
        match self.nonbasic_state(v) {
            State::Lower => self.lo[v],
            State::Upper => self.hi[v],
            _ => 0.0,
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&v| (self.lo[v] - self.x[v]).max(self.x[v] - self.hi[v]).max(0.0))
            .sum()
    }

    fn phase_costs(&self) -> Option<Vec<f64>> {
        let tol = self.ftol();
        let mut any = false;
        let costs = self
            .basis
            .iter()
            .map(|&v| {
                if self.x[v] < self.lo[v] - tol {
                    any = true;
                    -1.0
                } else if self.x[v] > self.hi[v] + tol {
                    any = true;
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        any.then_some(costs)
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        let mut d = c;
        for &(i, a) in &self.cols[j] {
            d -= y[i] * a;
        }
        d
    }

    fn eligible(&self, j: usize, d: f64) -> Option<f64> {
        let tol = self.opts.tolerances.optimality;
        match self.state[j] {
            State::Basic(_) => None,
            _ if self.lo[j] == self.hi[j] => None,
            State::Lower if d < -tol => Some(1.0),
            State::Upper if d > tol => Some(-1.0),
            State::Free if d.abs() > tol => Some(if d < 0.0 { 1.0 } else { -1.0 }),
            _ => None,
        }
    }

    fn price(&mut self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let total = self.n + self.m;
        if bland {
            for j in 0..total {
                let d = self.reduced_cost(j, y, phase1);
                if let Some(dir) = self.eligible(j, d) {
                    return Some((j, dir));
                }
            }
            return None;
        }
        let window = (total / 8).max(2000).min(total);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut scanned = 0;
        let mut j = self.price_cursor;
        while scanned < total {
            if !matches!(self.state[j], State::Basic(_)) {
                let d = self.reduced_cost(j, y, phase1);
                if let Some(dir) = self.eligible(j, d) {
                    if best.map_or(true, |b| d.abs() > b.2) {
                        best = Some((j, dir, d.abs()));
                    }
                }
            }
            scanned += 1;
            j += 1;
            if j == total {
                j = 0;
            }
            if scanned >= window && best.is_some() {
                break;
            }
        }
        self.price_cursor = j;
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run(&mut self) -> Outcome {
        let started = Instant::now();
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::Limit(LpStatus::IterationLimit);
            }
            if let Some(limit) = self.opts.time_limit {
                if self.iterations % 64 == 0 && started.elapsed() > limit {
                    return Outcome::Limit(LpStatus::TimeLimit);
                }
            }
            if self.factor.num_etas() >= self.opts.refactor_interval {
                self.refactor();
            }

            let phase_costs = self.phase_costs();
            let phase1 = phase_costs.is_some();
            let mut y = phase_costs
                .unwrap_or_else(|| self.basis.iter().map(|&v| self.cost[v]).collect());
            self.factor.btran(&mut y);

            let Some((q, dir)) = self.price(&y, phase1, bland) else {
                if self.factor.num_etas() > 0 {
                    // confirm on a fresh factorization before concluding
                    self.refactor();
                    let still = self.phase_costs().is_some();
                    if still != phase1 {
                        continue;
                    }
                    let mut y2 = self.phase_costs().unwrap_or_else(|| {
                        self.basis.iter().map(|&v| self.cost[v]).collect()
                    });
                    self.factor.btran(&mut y2);
                    if self.price(&y2, phase1, true).is_some() {
                        continue;
                    }
                }
                return if phase1 { Outcome::Infeasible } else { Outcome::Optimal };
            };

            let mut alpha = vec![0.0; self.m];
            for &(i, a) in &self.cols[q] {
                alpha[i] = a;
            }
            self.factor.ftran(&mut alpha);

            let step = self.ratio_test(&alpha, dir, phase1, bland);
            let flip = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                Some(self.hi[q] - self.lo[q])
            } else {
                None
            };

            let (t, leave) = match (step, flip) {
                (Some((t, p, to_upper)), Some(f)) if f <= t => {
                    let _ = (p, to_upper);
                    (f, None)
                }
                (Some((t, p, to_upper)), _) => (t, Some((p, to_upper))),
                (None, Some(f)) => (f, None),
                (None, None) => {
                    if phase1 {
                        // numerically lost direction; refresh and retry
                        self.refactor();
                        bland = true;
                        self.iterations += 1;
                        continue;
                    }
                    return Outcome::Unbounded;
                }
            };

            self.iterations += 1;
            let t = t.max(0.0);
            if t <= 1e-12 {
                degenerate += 1;
                if degenerate > self.opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            if t > 0.0 {
                self.x[q] += dir * t;
                for (p, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let v = self.basis[p];
                        self.x[v] -= dir * t * a;
                    }
                }
            }

            match leave {
                None => {
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((p, to_upper)) => {
                    let out = self.basis[p];
                    self.state[out] = if to_upper { State::Upper } else { State::Lower };
                    self.x[out] = if to_upper { self.hi[out] } else { self.lo[out] };
                    self.basis[p] = q;
                    self.state[q] = State::Basic(p);
                    self.factor.push_eta(p, &alpha);
                }
            }
        }
    }

    /// Returns `(step, position, leaves_at_upper)` for the blocking basic
    /// variable, or `None` when no basic variable limits the step.
    fn ratio_test(&self, alpha: &[f64], dir: f64, phase1: bool, bland: bool) -> Option<(f64, usize, bool)> {
        let tol = self.ftol();
        // (position, rate, slack to the bound being approached, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let v = self.basis[p];
            let rate = -dir * a;
            let (x, l, h) = (self.x[v], self.lo[v], self.hi[v]);
            if phase1 && x < l - tol {
                if rate > 0.0 {
                    cands.push((p, rate, l - x, false));
                }
            } else if phase1 && x > h + tol {
                if rate < 0.0 {
                    cands.push((p, rate, x - h, true));
                }
            } else if rate < 0.0 {
                if l.is_finite() {
                    cands.push((p, rate, (x - l).max(0.0), false));
                }
            } else if h.is_finite() {
                cands.push((p, rate, (h - x).max(0.0), true));
            }
        }
        if cands.is_empty() {
            return None;
        }
        if bland {
            let mut best: Option<(f64, usize, usize, bool)> = None;
            for &(p, rate, slack, up) in &cands {
                let t = slack / rate.abs();
                let v = self.basis[p];
                let better = match best {
                    None => true,
                    Some((bt, _, bv, _)) => t < bt - 1e-12 || (t <= bt + 1e-12 && v < bv),
                };
                if better {
                    best = Some((t, p, v, up));
                }
            }
            return best.map(|(t, p, _, up)| (t, p, up));
        }
        let tmax = cands
            .iter()
            .map(|&(_, rate, slack, _)| (slack + tol) / rate.abs())
            .fold(f64::INFINITY, f64::min);
        let mut best: Option<(f64, f64, usize, bool)> = None;
        for &(p, rate, slack, up) in &cands {
            let t = slack / rate.abs();
            if t <= tmax {
                let a = alpha[p].abs();
                if best.map_or(true, |b| a > b.1) {
                    best = Some((t, a, p, up));
                }
            }
        }
        best.map(|(t, _, p, up)| (t, p, up))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Var;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn single_upper_bound_row() {
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(0.0, f64::INFINITY, 1.0);
        m.add_row(vec![(x, 1.0)], Relation::Le, 3.0);
        let s = solve_lp(&m, &opts()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_two_variable_lp() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(0.0, f64::INFINITY, 3.0);
        let y = m.add_var(0.0, f64::INFINITY, 5.0);
        m.add_row(vec![(x, 1.0)], Relation::Le, 4.0);
        m.add_row(vec![(y, 2.0)], Relation::Le, 12.0);
        m.add_row(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = solve_lp(&m, &opts()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.primal[0] - 2.0).abs() < 1e-9 && (s.primal[1] - 6.0).abs() < 1e-9);
        let dual = crate::dual_objective(&m, &s).unwrap();
        assert!((dual - 36.0).abs() < 1e-6);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min x + y, x + y = 2, x - y >= 1, y >= 0.25
        let mut m = LpModel::new(Sense::Minimize);
        let x = m.add_var(0.0, f64::INFINITY, 1.0);
        let y = m.add_var(0.25, f64::INFINITY, 1.0);
        m.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 2.0);
        m.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Ge, 1.0);
        let s = solve_lp(&m, &opts()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!(m.max_violation(&s.primal) < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(0.0, f64::INFINITY, 1.0);
        m.add_row(vec![(x, 1.0)], Relation::Ge, 5.0);
        m.add_row(vec![(x, 1.0)], Relation::Le, 4.0);
        assert_eq!(solve_lp(&m, &opts()).unwrap().status, LpStatus::Infeasible);

        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(0.0, f64::INFINITY, 1.0);
        let y = m.add_var(0.0, f64::INFINITY, 0.0);
        m.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&m, &opts()).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_degenerate_but_finish() {
        // x1 + x2 + x3 = 1 written three times, plus degenerate caps
        let mut m = LpModel::new(Sense::Maximize);
        let v: Vec<Var> = (0..3).map(|k| m.add_var(0.0, f64::INFINITY, (k + 1) as f64)).collect();
        for _ in 0..3 {
            m.add_row(v.iter().map(|&x| (x, 1.0)).collect(), Relation::Eq, 1.0);
        }
        m.add_row(vec![(v[2], 1.0), (v[1], -1.0)], Relation::Le, 0.0);
        m.add_row(vec![(v[1], 1.0), (v[0], -1.0)], Relation::Le, 0.0);
        let s = solve_lp(&m, &opts()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn boxed_variables_flip_bounds() {
        // max x + y with 0 <= x,y <= 1 and x + y <= 1.5
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(0.0, 1.0, 1.0);
        let y = m.add_var(0.0, 1.0, 1.0);
        m.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.5);
        let s = solve_lp(&m, &opts()).unwrap();
        assert!((s.objective - 1.5).abs() < 1e-9);
    }

    #[test]
    fn free_variable_enters() {
        // min x subject to x >= -3 as a row, x free
        let mut m = LpModel::new(Sense::Minimize);
        let x = m.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        m.add_row(vec![(x, 1.0)], Relation::Ge, -3.0);
        let s = solve_lp(&m, &opts()).unwrap();
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_repeat() {
        let mut m = LpModel::new(Sense::Maximize);
        let v: Vec<Var> = (0..6).map(|_| m.add_var(0.0, f64::INFINITY, 1.0)).collect();
        for k in 0..6 {
            m.add_row(vec![(v[k], 1.0), (v[(k + 1) % 6], 1.0)], Relation::Le, 1.0);
        }
        let a = solve_lp(&m, &opts()).unwrap();
        let b = solve_lp(&m, &opts()).unwrap();
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.iterations, b.iterations);
    }
}
