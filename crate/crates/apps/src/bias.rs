//! Monte Carlo estimate of the downward bias in the variance of empirical
//! squared-Euclidean barycenters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use msdro_core::barycenter::DEFAULT_ENUMERATION_CAP;
use msdro_core::{barycenter, DiscreteDistribution, Error, GroundCost, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub mean_variance: f64,
    pub true_variance: f64,
    pub runs: usize,
    /// Standard error of `mean_variance`.
    pub std_error: f64,
    pub t_statistic: f64,
    /// One-sided p-value for "mean empirical variance < true variance".
    pub p_value: f64,
}

/// Equal-weight barycenter of two one-dimensional samples of equal size.
/// Small instances go through the multi-margin LP; larger ones use the
/// sorted matching, which is optimal on the line.
pub fn empirical_barycenter(x: &[f64], y: &[f64]) -> Result<DiscreteDistribution> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput("samples must be nonempty and of equal size".into()));
    }
    if x.len() * y.len() <= DEFAULT_ENUMERATION_CAP {
        let p = DiscreteDistribution::uniform(x.iter().map(|v| vec![*v]).collect())?;
        let q = DiscreteDistribution::uniform(y.iter().map(|v| vec![*v]).collect())?;
        return Ok(barycenter(&[p, q], &[0.5, 0.5], &GroundCost::SqEuclidean)?.barycenter);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    ys.sort_by(|a, b| a.total_cmp(b));
    DiscreteDistribution::uniform(xs.iter().zip(&ys).map(|(a, b)| vec![0.5 * (a + b)]).collect())
}

pub fn barycenter_bias_demo(mu: (f64, f64), sigma: f64, n: usize, runs: usize, seed: u64) -> Result<BiasReport> {
    if n == 0 || runs < 2 || !(sigma >= 0.0) {
        return Err(Error::InvalidInput("need N >= 1, at least two runs and sigma >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = Normal::new(mu.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let g2 = Normal::new(mu.1, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut variances = Vec::with_capacity(runs);
    for _ in 0..runs {
        let x: Vec<f64> = (0..n).map(|_| g1.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| g2.sample(&mut rng)).collect();
        variances.push(empirical_barycenter(&x, &y)?.variance());
    }
    let r = runs as f64;
    let mean = variances.iter().sum::<f64>() / r;
    let sd = (variances.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    let true_variance = sigma * sigma;
    let std_error = sd / r.sqrt();
    let (t, p) = if std_error > 0.0 {
        let t = (mean - true_variance) / std_error;
        let dist = StudentsT::new(0.0, 1.0, r - 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
        (t, dist.cdf(t))
    } else if mean < true_variance {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(BiasReport { mean_variance: mean, true_variance, runs, std_error, t_statistic: t, p_value: p })
}
