//! Sparse LP/ILP model representation.

use std::fmt::Write as _;

use crate::LpError;

/// Objective direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Row relation against the right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Index of a variable inside an [`LpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

/// Index of a constraint row inside an [`LpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program in row form with per-variable bounds.
///
/// Rows are kept exactly as added; duplicate entries for the same variable in
/// one row are summed when the model is handed to a solver.
#[derive(Clone, Debug)]
pub struct LpModel {
    sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer: Vec<bool>,
    rows: Vec<Row>,
}

impl LpModel {
    pub fn new(sense: Sense) -> Self {
        LpModel {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            integer: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, obj: f64) -> Var {
        self.objective.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(false);
        Var(self.objective.len() - 1)
    }

    pub fn add_integer_var(&mut self, lower: f64, upper: f64, obj: f64) -> Var {
        let v = self.add_var(lower, upper, obj);
        self.integer[v.0] = true;
        v
    }

    pub fn add_row(&mut self, coeffs: Vec<(Var, f64)>, relation: Relation, rhs: f64) -> RowId {
        let coeffs = coeffs.into_iter().map(|(v, c)| (v.0, c)).collect();
        self.rows.push(Row { coeffs, relation, rhs });
        RowId(self.rows.len() - 1)
    }

    pub fn set_objective(&mut self, var: Var, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    pub fn set_bounds(&mut self, var: Var, lower: f64, upper: f64) {
        self.lower[var.0] = lower;
        self.upper[var.0] = upper;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.rows[row.0].rhs = rhs;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn integrality(&self) -> &[bool] {
        &self.integer
    }
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }
    pub fn has_integers(&self) -> bool {
        self.integer.iter().any(|&b| b)
    }
    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Checks index ranges, bound ordering and finiteness of right-hand sides.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(LpError::InvalidModel(format!(
                    "variable {j} has bounds [{lo}, {hi}]"
                )));
            }
            if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::InvalidModel(format!(
                    "variable {j} has an empty domain [{lo}, {hi}]"
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::InvalidModel(format!(
                    "variable {j} has non-finite objective coefficient"
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::InvalidModel(format!("row {i} has non-finite rhs")));
            }
            for &(j, c) in &row.coeffs {
                if j >= n {
                    return Err(LpError::InvalidModel(format!(
                        "row {i} references variable {j} but the model has {n}"
                    )));
                }
                if !c.is_finite() {
                    return Err(LpError::InvalidModel(format!(
                        "row {i} has a non-finite coefficient for variable {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Objective value of `x` under this model's coefficients.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            let viol = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Plain-text dump: one line for the objective, one per row, one per
    /// non-default bound, and one listing integer variables.
    ///
    /// ```text
    /// max: +1 x0 -2 x3
    /// r0: +1 x0 +1 x1 <= 4
    /// bound x3: 0 <= x3 <= 1
    /// int: x3
    /// ```
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let head = match self.sense {
            Sense::Maximize => "max:",
            Sense::Minimize => "min:",
        };
        out.push_str(head);
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {c:+} x{j}");
            }
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "r{i}:");
            for &(j, c) in &row.coeffs {
                let _ = write!(out, " {c:+} x{j}");
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", row.rhs);
        }
        for j in 0..self.num_vars() {
            if self.lower[j] != 0.0 || self.upper[j] != f64::INFINITY {
                let _ = writeln!(out, "bound x{j}: {} <= x{j} <= {}", self.lower[j], self.upper[j]);
            }
        }
        let ints: Vec<String> = (0..self.num_vars())
            .filter(|&j| self.integer[j])
            .map(|j| format!("x{j}"))
            .collect();
        if !ints.is_empty() {
            let _ = writeln!(out, "int: {}", ints.join(" "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_bad_index_and_bounds() {
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(0.0, 1.0, 1.0);
        m.add_row(vec![(x, 1.0), (Var(7), 1.0)], Relation::Le, 1.0);
        assert!(matches!(m.validate(), Err(LpError::InvalidModel(_))));

        let mut m = LpModel::new(Sense::Maximize);
        m.add_var(2.0, 1.0, 1.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn dump_lists_rows_and_bounds() {
        let mut m = LpModel::new(Sense::Minimize);
        let x = m.add_var(0.0, f64::INFINITY, 1.0);
        let y = m.add_integer_var(0.0, 1.0, -2.0);
        m.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
        let text = m.dump();
        assert!(text.starts_with("min: +1 x0 -2 x1"));
        assert!(text.contains("r0: +1 x0 +1 x1 >= 1"));
        assert!(text.contains("bound x1: 0 <= x1 <= 1"));
        assert!(text.contains("int: x1"));
    }
}
