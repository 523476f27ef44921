//! Optimal transport barycenters through the multi-margin transport LP and
//! the pushforward of its optimal plan under the inner minimizer.

use msdro_lp::{solve_lp_with, LpBuilder, LpStatus, RowSense, Sense, SolverOptions};

use crate::distribution::{DiscreteDistribution, GroundCost, Norm};
use crate::error::{Error, Result};
use crate::multi_index::{product_size, MultiIndices};

pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;
const MERGE_TOL: f64 = 1e-10;

/// Sparse multi-margin coupling.
#[derive(Debug, Clone)]
pub struct MultiMarginPlan {
    /// `(alpha, mass)` with positive masses, alpha in lexicographic order.
    pub entries: Vec<(Vec<usize>, f64)>,
    pub marginals: Vec<DiscreteDistribution>,
}

impl MultiMarginPlan {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Marginal masses of the `k`-th coordinate.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.marginals[k].len()];
        for (alpha, m) in &self.entries {
            out[alpha[k]] += m;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: DiscreteDistribution,
    pub plan: MultiMarginPlan,
    /// `sum_k lambda_k C(P*, P_k)`.
    pub objective: f64,
}

/// Minimizes `sum_k w_k c(x, points[k])` over `x`; returns the optimal value
/// and a minimizer. Points with zero weight are ignored.
pub fn inner_minimizer(points: &[&[f64]], weights: &[f64], cost: &GroundCost) -> Result<(f64, Vec<f64>)> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::InvalidInput("need one weight per point".into()));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllWeightsZero);
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.len() });
    }
    let active: Vec<(&[f64], f64)> = points.iter().copied().zip(weights.iter().copied()).filter(|(_, w)| *w > 0.0).collect();
    let x: Vec<f64> = match *cost {
        GroundCost::SqEuclidean => (0..d).map(|i| active.iter().map(|(p, w)| w * p[i]).sum::<f64>() / total).collect(),
        GroundCost::NormPower { norm: Norm::L1, p: 1 } => (0..d)
            .map(|i| {
                let mut coord: Vec<(f64, f64)> = active.iter().map(|(p, w)| (p[i], *w)).collect();
                coord.sort_by(|a, b| a.0.total_cmp(&b.0));
                weighted_median_lower(&coord, total)
            })
            .collect(),
        other => {
            return Err(Error::UnsupportedCost(format!("{other:?}: barycenters support squared Euclidean or l1 with p = 1")))
        }
    };
    let phi = active.iter().map(|(p, w)| w * cost.eval(&x, p)).sum();
    Ok((phi, x))
}

/// Smallest value whose cumulative weight reaches half the total.
fn weighted_median_lower(sorted: &[(f64, f64)], total: f64) -> f64 {
    let half = 0.5 * total;
    let mut cum = 0.0;
    for &(v, w) in sorted {
        cum += w;
        if cum >= half - 1e-12 * total {
            return v;
        }
    }
    sorted.last().map(|s| s.0).unwrap_or(0.0)
}

pub fn barycenter(dists: &[DiscreteDistribution], weights: &[f64], cost: &GroundCost) -> Result<BarycenterResult> {
    barycenter_with_cap(dists, weights, cost, DEFAULT_ENUMERATION_CAP)
}

pub fn barycenter_with_cap(
    dists: &[DiscreteDistribution],
    weights: &[f64],
    cost: &GroundCost,
    cap: usize,
) -> Result<BarycenterResult> {
    if dists.is_empty() || dists.len() != weights.len() {
        return Err(Error::InvalidInput("need one weight per distribution".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let d = dists[0].dim();
    if let Some(q) = dists.iter().find(|q| q.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: q.dim() });
    }
    let shape: Vec<usize> = dists.iter().map(|q| q.len()).collect();
    let size = product_size(&shape);
    if size > cap {
        return Err(Error::SizeExceeded { size, cap });
    }

    let mut b = LpBuilder::new(Sense::Minimize);
    let mut offsets = Vec::with_capacity(dists.len());
    let mut rows = 0;
    for q in dists {
        offsets.push(rows);
        for &p in q.probs() {
            b.add_row(RowSense::Eq, p);
            rows += 1;
        }
    }
    let mut alphas = Vec::with_capacity(size);
    let mut minimizers = Vec::with_capacity(size);
    for alpha in MultiIndices::new(&shape) {
        let pts: Vec<&[f64]> = alpha.iter().enumerate().map(|(k, &j)| dists[k].atom(j)).collect();
        let (phi, x) = inner_minimizer(&pts, weights, cost)?;
        let col = b.add_nonneg_var(phi);
        for (k, &j) in alpha.iter().enumerate() {
            b.set(offsets[k] + j, col, 1.0);
        }
        alphas.push(alpha);
        minimizers.push(x);
    }
    let model = b.build()?;
    let opts = SolverOptions::default().with_max_cols(size.max(SolverOptions::default().max_cols));
    let sol = solve_lp_with(&model, &opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("multi-margin LP ended {:?}", sol.status)));
    }

    let mut entries = Vec::new();
    let mut pushforward = Vec::new();
    let mut objective = 0.0;
    for (col, alpha) in alphas.into_iter().enumerate() {
        let mass = sol.x[col];
        if mass > 1e-14 {
            objective += mass * model.objective()[col];
            pushforward.push((minimizers[col].clone(), mass));
            entries.push((alpha, mass));
        }
    }
    let barycenter = DiscreteDistribution::from_weighted(pushforward, MERGE_TOL, 0.0)?;
    Ok(BarycenterResult { barycenter, plan: MultiMarginPlan { entries, marginals: dists.to_vec() }, objective })
}

/// `sum_k lambda_k C(Q, P_k)` for a candidate distribution `Q`.
pub fn barycenter_objective(
    candidate: &DiscreteDistribution,
    dists: &[DiscreteDistribution],
    weights: &[f64],
    cost: &GroundCost,
) -> Result<f64> {
    let mut total = 0.0;
    for (q, &w) in dists.iter().zip(weights) {
        if w != 0.0 {
            total += w * crate::transport::ot_cost(candidate, q, cost)?.value;
        }
    }
    Ok(total)
}
