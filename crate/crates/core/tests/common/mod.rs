#![allow(dead_code)]

use msdro_core::transport::wasserstein_distance;
use msdro_core::{AmbiguitySpec, DiscreteDistribution, GroundCost, Norm, PiecewiseAffineLoss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DiscreteDistribution {
    let atoms: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let probs: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    let total: f64 = probs.iter().sum();
    DiscreteDistribution::new(atoms, probs.iter().map(|p| p / total).collect()).unwrap()
}

pub fn random_loss(rng: &mut ChaCha8Rng, pieces: usize, d: usize) -> PiecewiseAffineLoss {
    PiecewiseAffineLoss::new(
        (0..pieces).map(|_| ((0..d).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-1.0..1.0))).collect(),
    )
    .unwrap()
}

/// Small instance inside the unit box whose balls all contain a common
/// reference distribution with some slack.
pub struct Instance {
    pub amb: AmbiguitySpec,
    pub loss: PiecewiseAffineLoss,
    pub d: usize,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let d = r.random_range(1..=2);
    let kk = r.random_range(1..=2);
    let pieces = r.random_range(1..=3);
    let reference = random_distribution(&mut r, 2, d);
    let sources = (0..kk)
        .map(|_| {
            let n = r.random_range(1..=3);
            let center = random_distribution(&mut r, n, d);
            let w = wasserstein_distance(&reference, &center, Norm::L1, 1).unwrap();
            let radius = w + r.random_range(0.15..0.4);
            (center, radius)
        })
        .collect();
    let amb = AmbiguitySpec::new(GroundCost::L1, sources).unwrap();
    let loss = random_loss(&mut r, pieces, d);
    Instance { amb, loss, d }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
