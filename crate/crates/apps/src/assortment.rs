//! Assortment selection: choose at most `B` products maximizing worst-case
//! expected revenue over an intersection of l1 transport balls on demand.

use msdro_core::msdro::{build_dual_lp_with, estimated_rows};
use msdro_core::{
    worst_case_value_with, AmbiguitySpec, DecisionLoss, DecisionPiece, Error, GroundCost, MsdroOptions, PiecewiseAffineLoss,
    Polyhedron, Result,
};
use msdro_lp::{for_each_support, solve_binary_by_enumeration};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AssortmentSpec {
    pub prices: Vec<f64>,
    pub capacity: usize,
    pub ambiguity: AmbiguitySpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssortmentSolution {
    /// Selected products, increasing.
    pub selection: Vec<usize>,
    pub revenue: f64,
    pub supports_evaluated: usize,
}

impl AssortmentSpec {
    pub fn validate(&self) -> Result<()> {
        self.ambiguity.validate()?;
        let d = self.ambiguity.dim();
        if self.prices.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.prices.len() });
        }
        if self.prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("prices must be finite and nonnegative".into()));
        }
        if self.capacity > d {
            return Err(Error::InvalidInput(format!("capacity {} exceeds {d} products", self.capacity)));
        }
        if self.ambiguity.cost != GroundCost::L1 {
            return Err(Error::UnsupportedCost("assortment model uses the l1 transport cost".into()));
        }
        Ok(())
    }

    /// Negative revenue `-sum_i theta_i p_i xi_i` with `theta` as decision.
    pub fn loss(&self) -> DecisionLoss {
        let d = self.prices.len();
        let a_theta = (0..d)
            .map(|i| {
                let mut row = vec![0.0; d];
                row[i] = -self.prices[i];
                row
            })
            .collect();
        DecisionLoss { num_decisions: d, pieces: vec![DecisionPiece { a_theta, a0: vec![0.0; d], beta: vec![0.0; d], b0: 0.0 }] }
    }

    /// `0 <= theta <= 1`, `sum theta <= B`.
    pub fn decision_set(&self) -> Polyhedron {
        let d = self.prices.len();
        let mut poly = Polyhedron::bounds(&vec![0.0; d], &vec![1.0; d]);
        poly.c.push(vec![1.0; d]);
        poly.g.push(self.capacity as f64);
        poly
    }

    /// Demands are nonnegative.
    pub fn support(&self) -> Polyhedron {
        Polyhedron::nonnegative(self.prices.len())
    }

    /// Worst-case expected revenue of a fixed selection.
    pub fn revenue_of(&self, selection: &[usize], opts: &MsdroOptions) -> Result<f64> {
        let d = self.prices.len();
        let mut a = vec![0.0; d];
        for &i in selection {
            a[i] = -self.prices[i];
        }
        let loss = PiecewiseAffineLoss::affine(a, 0.0);
        Ok(-worst_case_value_with(&self.ambiguity, &loss, &self.support(), opts)?.value)
    }
}

/// Solves the joint dual LP with the selection variables fixed per
/// support when it is small enough, and otherwise evaluates each support
/// separately.
pub fn assortment_solve(spec: &AssortmentSpec) -> Result<AssortmentSolution> {
    spec.validate()?;
    let opts = MsdroOptions::default();
    let d = spec.prices.len();
    let decisions = spec.decision_set();
    let rows = estimated_rows(&spec.ambiguity, 1, decisions.num_rows());
    if rows <= opts.max_rows {
        let (model, _) = build_dual_lp_with(&spec.ambiguity, &spec.loss(), &decisions, &spec.support(), opts.max_rows)?;
        let binaries: Vec<usize> = (0..d).collect();
        let best = solve_binary_by_enumeration(&model, &binaries, spec.capacity)?
            .ok_or_else(|| Error::Numerical("no support produced an optimal inner problem".into()))?;
        return Ok(AssortmentSolution {
            selection: best.support.clone(),
            revenue: -best.solution.objective,
            supports_evaluated: best.supports_evaluated,
        });
    }
    enumerate_supports(spec, &opts)
}

/// Evaluates every support with at most `B` products; ties keep the
/// first support in enumeration order.
pub fn enumerate_supports(spec: &AssortmentSpec, opts: &MsdroOptions) -> Result<AssortmentSolution> {
    spec.validate()?;
    let d = spec.prices.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evaluated = 0;
    let mut failure = None;
    for_each_support(d, spec.capacity, msdro_lp::DEFAULT_SUBSET_CAP, |support| {
        evaluated += 1;
        match spec.revenue_of(support, opts) {
            Ok(v) => {
                if best.as_ref().is_none_or(|b| v > b.1 + 1e-12 * (1.0 + b.1.abs())) {
                    best = Some((support.to_vec(), v));
                }
            }
            Err(e) => failure = failure.take().or(Some(e)),
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (selection, revenue) = best.ok_or_else(|| Error::Numerical("no support evaluated".into()))?;
    Ok(AssortmentSolution { selection, revenue, supports_evaluated: evaluated })
}
