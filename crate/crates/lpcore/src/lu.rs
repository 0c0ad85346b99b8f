//! Sparse LU factorization of a simplex basis with product-form eta updates.
//!
//! The factorization is a right-looking Markowitz elimination. Column and row
//! singletons are taken first (network bases are close to triangular), the
//! remaining nucleus is pivoted by minimum Markowitz count under a relative
//! threshold.

use std::collections::BTreeSet;

const PIVOT_THRESHOLD: f64 = 0.1;
const ABS_PIVOT_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

/// Rows and basis positions left without a pivot when the basis is singular.
#[derive(Debug)]
pub(crate) struct Singular {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

pub(crate) struct BasisFactor {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
}

struct Active {
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<usize>>,
    row_alive: Vec<bool>,
    col_alive: Vec<bool>,
}

impl Active {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.cols[j].iter().find(|e| e.0 == i).map_or(0.0, |e| e.1)
    }

    fn col_max(&self, j: usize) -> f64 {
        self.cols[j].iter().fold(0.0_f64, |acc, e| acc.max(e.1.abs()))
    }
}

impl BasisFactor {
    /// Factorizes the `m x m` basis whose columns are given sparse by row.
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut act = Active {
            cols: columns
                .iter()
                .map(|c| c.iter().copied().filter(|e| e.1 != 0.0).collect())
                .collect(),
            rows: vec![Vec::new(); m],
            row_alive: vec![true; m],
            col_alive: vec![true; m],
        };
        for (j, col) in act.cols.iter().enumerate() {
            for &(i, _) in col {
                act.rows[i].push(j);
            }
        }

        let mut f = BasisFactor {
            m,
            piv_row: Vec::with_capacity(m),
            piv_col: Vec::with_capacity(m),
            piv_val: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            etas: Vec::new(),
        };

        let mut col_single: Vec<usize> = (0..m).filter(|&j| act.cols[j].len() == 1).collect();
        let mut row_single: Vec<usize> = (0..m).filter(|&i| act.rows[i].len() == 1).collect();
        let mut nucleus: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut in_nucleus = false;

        for _step in 0..m {
            let mut pivot: Option<(usize, usize)> = None;

            while let Some(j) = col_single.pop() {
                if act.col_alive[j] && act.cols[j].len() == 1 {
                    let (i, v) = act.cols[j][0];
                    if v.abs() > ABS_PIVOT_TOL {
                        pivot = Some((i, j));
                        break;
                    }
                }
            }
            if pivot.is_none() {
                while let Some(i) = row_single.pop() {
                    if act.row_alive[i] && act.rows[i].len() == 1 {
                        let j = act.rows[i][0];
                        let v = act.value(i, j);
                        if v.abs() > ABS_PIVOT_TOL && v.abs() >= PIVOT_THRESHOLD * act.col_max(j) {
                            pivot = Some((i, j));
                            break;
                        }
                    }
                }
            }
            if pivot.is_none() {
                if !in_nucleus {
                    in_nucleus = true;
                    for j in 0..m {
                        if act.col_alive[j] {
                            nucleus.insert((act.cols[j].len(), j));
                        }
                    }
                }
                pivot = markowitz_pick(&act, &nucleus);
            }
            let Some((r, c)) = pivot else {
                let rows = (0..m).filter(|&i| act.row_alive[i]).collect();
                let cols = (0..m).filter(|&j| act.col_alive[j]).collect();
                return Err(Singular { rows, cols });
            };

            let touched = f.eliminate(&mut act, r, c, in_nucleus.then_some(&mut nucleus));
            for j in touched.cols {
                if act.col_alive[j] && act.cols[j].len() == 1 {
                    col_single.push(j);
                }
            }
            for i in touched.rows {
                if act.row_alive[i] && act.rows[i].len() == 1 {
                    row_single.push(i);
                }
            }
        }
        Ok(f)
    }

    fn eliminate(
        &mut self,
        act: &mut Active,
        r: usize,
        c: usize,
        mut nucleus: Option<&mut BTreeSet<(usize, usize)>>,
    ) -> Touched {
        let p = act.value(r, c);
        let lcol: Vec<(usize, f64)> =
            act.cols[c].iter().filter(|e| e.0 != r).map(|&(i, v)| (i, v / p)).collect();
        let urow: Vec<(usize, f64)> = act.rows[r]
            .iter()
            .filter(|&&j| j != c)
            .map(|&j| (j, act.value(r, j)))
            .collect();

        let mut touched = Touched { rows: Vec::new(), cols: Vec::new() };

        if let Some(ns) = nucleus.as_deref_mut() {
            ns.remove(&(act.cols[c].len(), c));
            for &(j, _) in &urow {
                ns.remove(&(act.cols[j].len(), j));
            }
        }

        // Schur complement update on the columns of the pivot row.
        for &(j, urj) in &urow {
            let col = &mut act.cols[j];
            col.retain(|e| e.0 != r);
            for &(i, l) in &lcol {
                let delta = l * urj;
                match col.iter_mut().position(|e| e.0 == i) {
                    Some(pos) => {
                        col[pos].1 -= delta;
                        if col[pos].1.abs() < DROP_TOL {
                            col.swap_remove(pos);
                            if let Some(k) = act.rows[i].iter().position(|&x| x == j) {
                                act.rows[i].swap_remove(k);
                            }
                        }
                    }
                    None => {
                        if delta.abs() >= DROP_TOL {
                            col.push((i, -delta));
                            act.rows[i].push(j);
                        }
                    }
                }
            }
            touched.cols.push(j);
        }
        for &(i, _) in &lcol {
            if let Some(k) = act.rows[i].iter().position(|&x| x == c) {
                act.rows[i].swap_remove(k);
            }
            touched.rows.push(i);
        }
        act.cols[c].clear();
        act.rows[r].clear();
        act.row_alive[r] = false;
        act.col_alive[c] = false;

        if let Some(ns) = nucleus {
            for &(j, _) in &urow {
                if act.col_alive[j] {
                    ns.insert((act.cols[j].len(), j));
                }
            }
            // fill-in may have changed counts of columns outside the pivot row
            // only through rows; column counts change only for urow columns.
        }

        self.piv_row.push(r);
        self.piv_col.push(c);
        self.piv_val.push(p);
        for (i, l) in lcol {
            self.l_idx.push(i);
            self.l_val.push(l);
        }
        self.l_start.push(self.l_idx.len());
        for (j, u) in urow {
            self.u_idx.push(j);
            self.u_val.push(u);
        }
        self.u_start.push(self.u_idx.len());
        touched
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = a`. Input is indexed by row, output by basis position.
    pub fn ftran(&self, a: &mut Vec<f64>) {
        let m = self.m;
        for k in 0..m {
            let v = a[self.piv_row[k]];
            if v != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    a[self.l_idx[t]] -= self.l_val[t] * v;
                }
            }
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            let mut v = a[self.piv_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[t] * x[self.u_idx[t]];
            }
            x[self.piv_col[k]] = v / self.piv_val[k];
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, ai) in &eta.entries {
                    x[i] -= ai * xp;
                }
            }
        }
        *a = x;
    }

    /// Solves `y^T B = c^T`. Input is indexed by basis position, output by row.
    pub fn btran(&self, c: &mut Vec<f64>) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for &(i, ai) in &eta.entries {
                v -= c[i] * ai;
            }
            c[eta.pos] = v / eta.pivot;
        }
        let mut z = vec![0.0; m];
        for k in 0..m {
            let zr = c[self.piv_col[k]] / self.piv_val[k];
            z[self.piv_row[k]] = zr;
            if zr != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[t]] -= zr * self.u_val[t];
                }
            }
        }
        for k in (0..m).rev() {
            let mut acc = 0.0;
            for t in self.l_start[k]..self.l_start[k + 1] {
                acc += self.l_val[t] * z[self.l_idx[t]];
            }
            z[self.piv_row[k]] -= acc;
        }
        *c = z;
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }
}

struct Touched {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn markowitz_pick(act: &Active, nucleus: &BTreeSet<(usize, usize)>) -> Option<(usize, usize)> {
    const SEARCH_COLS: usize = 4;
    let mut best: Option<(usize, f64, usize, usize)> = None;
    let mut searched = 0;
    for &(cnt, j) in nucleus.iter() {
        if cnt == 0 || !act.col_alive[j] {
            continue;
        }
        let cmax = act.col_max(j);
        if cmax <= ABS_PIVOT_TOL {
            continue;
        }
        for &(i, v) in &act.cols[j] {
            if v.abs() < PIVOT_THRESHOLD * cmax || v.abs() <= ABS_PIVOT_TOL {
                continue;
            }
            let mk = (act.rows[i].len() - 1) * (cnt - 1);
            let better = match best {
                None => true,
                Some((bm, bv, _, _)) => mk < bm || (mk == bm && v.abs() > bv),
            };
            if better {
                best = Some((mk, v.abs(), i, j));
            }
        }
        searched += 1;
        if searched >= SEARCH_COLS && best.is_some() {
            break;
        }
    }
    best.map(|(_, _, i, j)| (i, j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[j];
            }
        }
        out
    }

    fn sample_basis() -> Vec<Vec<(usize, f64)>> {
        vec![
            vec![(0, 2.0), (2, 1.0)],
            vec![(1, -1.0), (3, 4.0)],
            vec![(0, 1.0), (1, 1.0), (2, 3.0)],
            vec![(3, 1.0), (2, -2.0)],
        ]
    }

    #[test]
    fn ftran_and_btran_invert_the_basis() {
        let cols = sample_basis();
        let f = BasisFactor::factorize(4, &cols).unwrap();
        let x_true = vec![1.0, -2.0, 0.5, 3.0];
        let mut b = dense_mul(&cols, &x_true, 4);
        f.ftran(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
        // y^T B = c^T  <=>  sum_i y_i B_ij = c_j
        let y_true = vec![0.25, 1.0, -1.0, 2.0];
        let mut c: Vec<f64> = cols.iter().map(|col| col.iter().map(|&(i, v)| y_true[i] * v).sum()).collect();
        f.btran(&mut c);
        for (a, e) in c.iter().zip(&y_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let mut cols = sample_basis();
        let mut f = BasisFactor::factorize(4, &cols).unwrap();
        let newcol = vec![(0, 1.0), (1, 1.0), (3, 1.0)];
        let mut alpha = vec![0.0; 4];
        for &(i, v) in &newcol {
            alpha[i] = v;
        }
        f.ftran(&mut alpha);
        f.push_eta(1, &alpha);
        cols[1] = newcol;
        let g = BasisFactor::factorize(4, &cols).unwrap();
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let (mut a, mut b) = (rhs.clone(), rhs.clone());
        f.ftran(&mut a);
        g.ftran(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        let (mut a, mut b) = (rhs.clone(), rhs);
        f.btran(&mut a);
        g.btran(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_basis_reports_leftovers() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        let err = BasisFactor::factorize(2, &cols).err().unwrap();
        assert_eq!(err.rows.len(), 1);
        assert_eq!(err.cols.len(), 1);
    }
}
