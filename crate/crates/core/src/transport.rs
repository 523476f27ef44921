//! Discrete optimal transport through the transportation LP.

use msdro_lp::{solve_lp_with, LpBuilder, LpStatus, RowSense, Sense, SolverOptions};

use crate::distribution::{DiscreteDistribution, GroundCost, Norm};
use crate::error::{Error, Result};

/// Sparse coupling between a source and a target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(source index, target index, mass)` with positive masses only.
    pub entries: Vec<(usize, usize, f64)>,
    pub source_len: usize,
    pub target_len: usize,
}

impl TransportPlan {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.source_len];
        for &(i, _, m) in &self.entries {
            s[i] += m;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.target_len];
        for &(_, j, m) in &self.entries {
            s[j] += m;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct OtResult {
    pub value: f64,
    pub plan: TransportPlan,
}

pub fn ot_cost(p: &DiscreteDistribution, q: &DiscreteDistribution, cost: &GroundCost) -> Result<OtResult> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    let (n, m) = (p.len(), q.len());
    let mut b = LpBuilder::new(Sense::Minimize);
    for i in 0..n {
        for j in 0..m {
            b.add_nonneg_var(cost.eval(p.atom(i), q.atom(j)));
        }
    }
    for i in 0..n {
        let row: Vec<(usize, f64)> = (0..m).map(|j| (i * m + j, 1.0)).collect();
        b.add_constraint(&row, RowSense::Eq, p.probs()[i]);
    }
    for j in 0..m {
        let row: Vec<(usize, f64)> = (0..n).map(|i| (i * m + j, 1.0)).collect();
        b.add_constraint(&row, RowSense::Eq, q.probs()[j]);
    }
    let model = b.build()?;
    let opts = SolverOptions::default().with_max_cols((n * m).max(SolverOptions::default().max_cols));
    let sol = solve_lp_with(&model, &opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("transportation LP ended {:?}", sol.status)));
    }
    let mut entries = Vec::new();
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            let mass = sol.x[i * m + j];
            if mass > 1e-15 {
                entries.push((i, j, mass));
                value += mass * model.objective()[i * m + j];
            }
        }
    }
    Ok(OtResult { value: value.max(0.0), plan: TransportPlan { entries, source_len: n, target_len: m } })
}

/// `W_p(P, Q)` for the cost `||x - y||^p`.
pub fn wasserstein_distance(p: &DiscreteDistribution, q: &DiscreteDistribution, norm: Norm, order: u32) -> Result<f64> {
    if order == 0 {
        return Err(Error::InvalidInput("Wasserstein order must be at least 1".into()));
    }
    let value = ot_cost(p, q, &GroundCost::NormPower { norm, p: order })?.value;
    Ok(value.powf(1.0 / order as f64))
}
