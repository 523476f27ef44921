//! Linear program container.
//!
//! A model is assembled through [`LpBuilder`] and is immutable afterwards. The
//! constraint matrix is stored column-major (CSC) because the simplex prices
//! columns far more often than it reads rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{LpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl RowSense {
    fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpModel {
    sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_sense: Vec<RowSense>,
    rhs: Vec<f64>,
    col_start: Vec<usize>,
    row_index: Vec<usize>,
    values: Vec<f64>,
}

/// Incremental assembly of an [`LpModel`]. Duplicate `(row, col)` entries are
/// summed when the model is built.
#[derive(Debug, Clone)]
pub struct LpBuilder {
    sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_sense: Vec<RowSense>,
    rhs: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
}

impl LpBuilder {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            row_sense: Vec::new(),
            rhs: Vec::new(),
            triplets: Vec::new(),
        }
    }

    /// Adds a variable with bounds `[lower, upper]` (infinite bounds allowed)
    /// and returns its column index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_free_var(&mut self, cost: f64) -> usize {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn add_nonneg_var(&mut self, cost: f64) -> usize {
        self.add_var(0.0, f64::INFINITY, cost)
    }

    pub fn add_row(&mut self, sense: RowSense, rhs: f64) -> usize {
        self.row_sense.push(sense);
        self.rhs.push(rhs);
        self.rhs.len() - 1
    }

    /// Adds a row together with its nonzeros.
    pub fn add_constraint(&mut self, entries: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let row = self.add_row(sense, rhs);
        for &(col, value) in entries {
            self.set(row, col, value);
        }
        row
    }

    /// Records a coefficient; zero values are dropped.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.triplets.push((row, col, value));
        }
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.objective[col] = cost;
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn build(self) -> Result<LpModel> {
        let n = self.objective.len();
        let m = self.rhs.len();
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::InvalidModel(format!("objective coefficient {j} is not finite")));
            }
        }
        for (i, &b) in self.rhs.iter().enumerate() {
            if !b.is_finite() {
                return Err(LpError::InvalidModel(format!("right-hand side {i} is not finite")));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::InvalidModel(format!("variable {j} has invalid bounds [{l}, {u}]")));
            }
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(row, col, value) in &self.triplets {
            if row >= m || col >= n {
                return Err(LpError::InvalidModel(format!("entry ({row}, {col}) outside a {m} x {n} matrix")));
            }
            if !value.is_finite() {
                return Err(LpError::InvalidModel(format!("entry ({row}, {col}) is not finite")));
            }
            *merged.entry((col, row)).or_insert(0.0) += value;
        }
        let mut col_start = vec![0usize; n + 1];
        let mut row_index = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (&(col, row), &value) in &merged {
            if value == 0.0 {
                continue;
            }
            col_start[col + 1] += 1;
            row_index.push(row);
            values.push(value);
        }
        for j in 0..n {
            col_start[j + 1] += col_start[j];
        }
        Ok(LpModel {
            sense: self.sense,
            objective: self.objective,
            lower: self.lower,
            upper: self.upper,
            row_sense: self.row_sense,
            rhs: self.rhs,
            col_start,
            row_index,
            values,
        })
    }
}

impl LpModel {
    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
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

    pub fn row_senses(&self) -> &[RowSense] {
        &self.row_sense
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Nonzeros of column `j` as `(row, value)` pairs.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_index[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Returns a copy of this model with different bounds on some columns.
    pub fn with_bounds(&self, changes: &[(usize, f64, f64)]) -> Result<LpModel> {
        let mut model = self.clone();
        for &(j, l, u) in changes {
            if j >= model.num_vars() || l > u || l.is_nan() || u.is_nan() {
                return Err(LpError::InvalidModel(format!("bad bound change on column {j}")));
            }
            model.lower[j] = l;
            model.upper[j] = u;
        }
        Ok(model)
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (i, a) in self.column(j) {
                    act[i] += a * xj;
                }
            }
        }
        act
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (i, act) in self.activities(x).into_iter().enumerate() {
            let b = self.rhs[i];
            let viol = match self.row_sense[i] {
                RowSense::Le => act - b,
                RowSense::Ge => b - act,
                RowSense::Eq => (act - b).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Checks that `ray` is a recession direction of the feasible set along
    /// which the objective strictly improves.
    pub fn is_improving_ray(&self, ray: &[f64], tol: f64) -> bool {
        let scale = ray.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return false;
        }
        for (j, &r) in ray.iter().enumerate() {
            if (self.lower[j].is_finite() && r < -tol * scale) || (self.upper[j].is_finite() && r > tol * scale) {
                return false;
            }
        }
        for (i, act) in self.activities(ray).into_iter().enumerate() {
            let ok = match self.row_sense[i] {
                RowSense::Le => act <= tol * scale,
                RowSense::Ge => act >= -tol * scale,
                RowSense::Eq => act.abs() <= tol * scale,
            };
            if !ok {
                return false;
            }
        }
        let slope = self.objective_value(ray);
        match self.sense {
            Sense::Minimize => slope < -tol * scale,
            Sense::Maximize => slope > tol * scale,
        }
    }

    /// Checks a Farkas certificate: row multipliers `y` such that
    /// `y^T (A x) - y^T b` is bounded away from zero in a fixed direction over
    /// the whole bound box, with row senses respected.
    ///
    /// Concretely, with `s` the row activity constrained by the row sense,
    /// the certificate proves `min over box of (y^T s - y^T A x) > 0`.
    pub fn verify_farkas(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.num_rows() {
            return false;
        }
        // min over the slack ranges of y_i * s_i
        let mut total = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let b = self.rhs[i];
            let (lo, hi) = match self.row_sense[i] {
                RowSense::Le => (f64::NEG_INFINITY, b),
                RowSense::Ge => (b, f64::INFINITY),
                RowSense::Eq => (b, b),
            };
            let v = if yi > 0.0 { yi * lo } else { yi * hi };
            if v == f64::NEG_INFINITY || v.is_nan() {
                return false;
            }
            total += v;
        }
        // min over the variable box of -(y^T A)_j x_j
        for j in 0..self.num_vars() {
            let coef: f64 = -self.column(j).map(|(i, a)| y[i] * a).sum::<f64>();
            if coef.abs() <= tol {
                continue;
            }
            let v = if coef > 0.0 { coef * self.lower[j] } else { coef * self.upper[j] };
            if v == f64::NEG_INFINITY || v.is_nan() {
                return false;
            }
            total += v;
        }
        total > tol
    }

    /// Plain-text dump: a header per row with its sense and right-hand side,
    /// followed by one `row col value` line per nonzero. Intended for
    /// debugging only.
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "# {sense} rows={} cols={} nnz={}", self.num_rows(), self.num_vars(), self.nnz());
        for (i, (s, b)) in self.row_sense.iter().zip(&self.rhs).enumerate() {
            let _ = writeln!(out, "row {i} {} {b}", s.symbol());
        }
        for j in 0..self.num_vars() {
            let _ = writeln!(out, "col {j} cost {} bounds {} {}", self.objective[j], self.lower[j], self.upper[j]);
        }
        for j in 0..self.num_vars() {
            for (i, a) in self.column(j) {
                let _ = writeln!(out, "{i} {j} {a}");
            }
        }
        out
    }
}
