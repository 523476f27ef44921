//! Portfolio weights as functions of the relative and absolute ambiguity
//! of two return sources.

use rayon::prelude::*;

use msdro_core::{wasserstein_distance, AmbiguitySpec, DiscreteDistribution, GroundCost, Norm, Result};

use crate::portfolio::{portfolio_solve, split_radii, PortfolioSpec};
use crate::synthetic::{empirical, generate, stream_rng, SpreadConvention, SyntheticModel};

pub const RHO: f64 = 10.0;
pub const ETA: f64 = 0.2;
pub const SAMPLES_PER_SOURCE: usize = 30;

#[derive(Debug, Clone)]
pub struct SensitivityData {
    pub source1: DiscreteDistribution,
    pub source2: DiscreteDistribution,
    pub distance: f64,
}

impl SensitivityData {
    pub fn generate(seed: u64, n: usize, convention: SpreadConvention) -> Result<Self> {
        let s1 = generate(SyntheticModel::Sensitivity { source: 1 }, n, &mut stream_rng(seed, 0, 0), convention);
        let s2 = generate(SyntheticModel::Sensitivity { source: 2 }, n, &mut stream_rng(seed, 0, 1), convention);
        Self::from_distributions(empirical(s1), empirical(s2))
    }

    pub fn from_distributions(source1: DiscreteDistribution, source2: DiscreteDistribution) -> Result<Self> {
        let distance = wasserstein_distance(&source1, &source2, Norm::L1, 1)?;
        Ok(Self { source1, source2, distance })
    }

    pub fn spec(&self, lambda: f64, m: f64) -> Result<PortfolioSpec> {
        let [e1, e2] = split_radii(lambda, m, self.distance);
        let amb = AmbiguitySpec::new(GroundCost::L1, vec![(self.source1.clone(), e1), (self.source2.clone(), e2)])?;
        PortfolioSpec::new(RHO, ETA, amb)
    }

    pub fn weights(&self, lambda: f64, m: f64) -> Result<Vec<f64>> {
        Ok(portfolio_solve(&self.spec(lambda, m)?)?.weights)
    }
}

/// One row of the long-format sweep output.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightRow {
    pub lambda: f64,
    pub m: f64,
    pub asset: usize,
    pub weight: f64,
}

/// Solves every `(lambda, m)` pair and lists the weights in grid order.
pub fn sweep(data: &SensitivityData, lambdas: &[f64], ms: &[f64]) -> Result<Vec<WeightRow>> {
    let pairs: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| ms.iter().map(move |&m| (l, m))).collect();
    let solved: Vec<Result<Vec<f64>>> = pairs.par_iter().map(|&(l, m)| data.weights(l, m)).collect();
    let mut rows = Vec::new();
    for ((lambda, m), weights) in pairs.into_iter().zip(solved) {
        for (i, w) in weights?.into_iter().enumerate() {
            rows.push(WeightRow { lambda, m, asset: i + 1, weight: w });
        }
    }
    Ok(rows)
}
