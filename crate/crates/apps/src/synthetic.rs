//! Seeded generators for the synthetic return and demand models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use msdro_core::DiscreteDistribution;

/// How a stated spread such as "1%" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadConvention {
    /// The spread is the standard deviation.
    #[default]
    StdDev,
    /// The spread is the variance.
    Variance,
}

impl SpreadConvention {
    pub fn sd(self, spread: f64) -> f64 {
        match self {
            SpreadConvention::StdDev => spread,
            SpreadConvention::Variance => spread.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticModel {
    /// Independent assets with mean `i%` (source 1) or `(11 - i)%`
    /// (source 2), `i = 1..=d`.
    Sensitivity { source: u8 },
    /// Factor model with two high-return assets.
    BacktestModel1,
    /// Factor model with five high-return assets.
    BacktestModel2,
}

pub const NUM_ASSETS: usize = 10;
pub const FACTOR_SPREAD: f64 = 0.02;
pub const IDIOSYNCRATIC_SPREAD: f64 = 0.01;

/// Expected idiosyncratic returns of a backtest model.
pub fn backtest_means(model: SyntheticModel) -> Vec<f64> {
    let high = match model {
        SyntheticModel::BacktestModel1 => (2, 0.004),
        SyntheticModel::BacktestModel2 => (5, 0.002),
        SyntheticModel::Sensitivity { source } => return sensitivity_means(source),
    };
    (1..=NUM_ASSETS).map(|i| if i <= high.0 { high.1 } else { -0.004 }).collect()
}

pub fn sensitivity_means(source: u8) -> Vec<f64> {
    (1..=NUM_ASSETS).map(|i| if source == 1 { i as f64 / 100.0 } else { (11 - i) as f64 / 100.0 }).collect()
}

/// RNG for one replication and one data stream; streams of the same
/// replication never overlap.
pub fn stream_rng(seed: u64, replication: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(replication));
    rng.set_stream(stream);
    rng
}

pub fn generate(model: SyntheticModel, n: usize, rng: &mut ChaCha8Rng, convention: SpreadConvention) -> Vec<Vec<f64>> {
    let means = backtest_means(model);
    let idio = Normal::new(0.0, convention.sd(IDIOSYNCRATIC_SPREAD)).expect("positive sd");
    match model {
        SyntheticModel::Sensitivity { .. } => (0..n).map(|_| means.iter().map(|m| m + idio.sample(rng)).collect()).collect(),
        _ => {
            let factor = Normal::new(0.0, convention.sd(FACTOR_SPREAD)).expect("positive sd");
            (0..n)
                .map(|_| {
                    let psi = factor.sample(rng);
                    means.iter().map(|m| psi + m + idio.sample(rng)).collect()
                })
                .collect()
        }
    }
}

pub fn generate_seeded(model: SyntheticModel, n: usize, seed: u64, convention: SpreadConvention) -> Vec<Vec<f64>> {
    generate(model, n, &mut ChaCha8Rng::seed_from_u64(seed), convention)
}

pub fn empirical(samples: Vec<Vec<f64>>) -> DiscreteDistribution {
    DiscreteDistribution::uniform(samples).expect("nonempty samples of equal dimension")
}

/// Demand regions for the assortment analogue: a target region whose
/// products alternate between resembling one existing region or the
/// other. Means per product `i` are `base + shift_r(i)`; demands are
/// normal and clipped at zero.
pub fn region_demands(region: usize, d: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let means: Vec<f64> = (0..d)
        .map(|i| {
            let base = 10.0 + 2.0 * i as f64;
            let tilt = if i % 2 == 0 { 3.0 } else { -3.0 };
            match region {
                0 => base,
                1 => base + if i % 2 == 0 { 0.5 } else { tilt },
                _ => base + if i % 2 == 0 { tilt } else { 0.5 },
            }
        })
        .collect();
    (0..n).map(|_| means.iter().map(|&m| Normal::new(m, 3.0).expect("positive sd").sample(rng).max(0.0)).collect()).collect()
}
