//! Radius calibration from light-tailed concentration bounds, Bayesian
//! significance levels under a prior on the source-target distance, and
//! the radius constructors built from them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distribution::{DiscreteDistribution, Norm};
use crate::error::{Error, Result};
use crate::transport::wasserstein_distance;

pub const DEFAULT_GRID_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    /// Tail exponent, must exceed `p`.
    pub a: f64,
    #[serde(rename = "A", default = "one")]
    pub big_a: f64,
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub p: f64,
}

fn one() -> f64 {
    1.0
}

impl ConcentrationParams {
    pub fn new(a: f64, c1: f64, c2: f64, d: f64, p: f64) -> Result<Self> {
        let params = Self { a, big_a: 1.0, c1, c2, d, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > self.p) {
            return Err(Error::InvalidParams(format!("tail exponent a = {} must exceed p = {}", self.a, self.p)));
        }
        if !(self.p > 0.0 && self.d > 0.0 && self.c1 > 0.0 && self.c2 > 0.0 && self.big_a > 0.0) {
            return Err(Error::InvalidParams("p, d, A, c1 and c2 must be positive".into()));
        }
        if (2.0 * self.p - self.d).abs() < 1e-12 {
            return Err(Error::InvalidParams("p = d/2 is not covered by the concentration bound".into()));
        }
        Ok(())
    }

    /// Exponent of `eps` for `eps <= 1`.
    pub fn small_exponent(&self) -> f64 {
        (self.d / self.p).max(2.0)
    }

    /// Exponent of `eps` for `eps > 1`.
    pub fn large_exponent(&self) -> f64 {
        self.a / self.p
    }

    pub fn exponent(&self, eps: f64) -> f64 {
        if eps <= 1.0 {
            self.small_exponent()
        } else {
            self.large_exponent()
        }
    }
}

/// Probability bound that the empirical distribution of `n` samples lies
/// farther than `eps` from the truth.
pub fn beta(eps: f64, n: f64, params: &ConcentrationParams) -> Result<f64> {
    params.validate()?;
    if !(eps >= 0.0) || !(n >= 1.0) {
        return Err(Error::PreconditionViolated(format!("need eps >= 0 and N >= 1, got eps = {eps}, N = {n}")));
    }
    Ok(beta_unchecked(eps, n, params))
}

fn beta_unchecked(eps: f64, n: f64, params: &ConcentrationParams) -> f64 {
    if eps == f64::INFINITY {
        return 0.0;
    }
    (params.c1 * (-params.c2 * n * eps.powf(params.exponent(eps))).exp()).min(1.0)
}

/// Smallest radius whose concentration bound equals `beta_target`.
pub fn eps_for_beta(beta_target: f64, n: f64, params: &ConcentrationParams) -> Result<f64> {
    params.validate()?;
    if !(beta_target > 0.0 && beta_target <= 1.0) || !(n >= 1.0) {
        return Err(Error::PreconditionViolated(format!("need beta in (0, 1] and N >= 1, got {beta_target}, {n}")));
    }
    if beta_target >= params.c1 {
        return Ok(0.0);
    }
    let log_ratio = (params.c1 / beta_target).ln();
    let base = log_ratio / (params.c2 * n);
    if large_sample_branch(beta_target, n, params) {
        Ok(base.powf((params.p / params.d).min(0.5)))
    } else {
        Ok(base.powf(params.p / params.a))
    }
}

/// True when `N >= log(c1 / beta) / c2`, the regime of radii below one.
pub fn large_sample_branch(beta_target: f64, n: f64, params: &ConcentrationParams) -> bool {
    n >= (params.c1 / beta_target).ln() / params.c2
}

/// Prior cumulative distribution function of the distance between the
/// target and a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Prior {
    Dirac {
        r: f64,
    },
    /// Normal with the given mean and standard deviation, truncated to
    /// `[0, inf)` and renormalized.
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// Piecewise linear CDF through `(r, f)` pairs.
    Table {
        r: Vec<f64>,
        f: Vec<f64>,
    },
    /// No information: all prior mass beyond any finite radius.
    None,
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::Dirac { r } if !(*r >= 0.0) || !r.is_finite() => {
                Err(Error::InvalidParams("Dirac prior needs a finite nonnegative location".into()))
            }
            Prior::Gaussian { mean, sd } if !mean.is_finite() || !(*sd > 0.0) => {
                Err(Error::InvalidParams("Gaussian prior needs a finite mean and positive sd".into()))
            }
            Prior::Table { r, f } => {
                if r.is_empty() || r.len() != f.len() {
                    return Err(Error::InvalidParams("table prior needs matching nonempty grids".into()));
                }
                let sorted = r.windows(2).all(|w| w[0] < w[1]) && f.windows(2).all(|w| w[0] <= w[1]);
                if !sorted || r[0] < 0.0 || f[0] < 0.0 || (f[f.len() - 1] - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParams(
                        "table prior must be increasing in r, nondecreasing in F, start at r >= 0 and end at F = 1".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        match self {
            Prior::Dirac { r: r0 } => {
                if r >= *r0 {
                    1.0
                } else {
                    0.0
                }
            }
            Prior::Gaussian { mean, sd } => {
                if !sd.is_finite() {
                    return 0.0;
                }
                let normal = Normal::new(*mean, *sd).expect("validated Gaussian prior");
                let below = normal.cdf(0.0);
                let mass = 1.0 - below;
                if mass <= 0.0 {
                    return 1.0;
                }
                ((normal.cdf(r) - below) / mass).clamp(0.0, 1.0)
            }
            Prior::Table { r: grid, f } => {
                if r < grid[0] {
                    return 0.0;
                }
                match grid.iter().position(|&g| g > r) {
                    None => f[f.len() - 1],
                    Some(i) => {
                        let (r0, r1) = (grid[i - 1], grid[i]);
                        f[i - 1] + (f[i] - f[i - 1]) * (r - r0) / (r1 - r0)
                    }
                }
            }
            Prior::None => 0.0,
        }
    }
}

/// `int_0^eps beta(eps - r, n) dF(r) + 1 - F(eps)`: the prior probability
/// bound that the source empirical distribution is farther than `eps`.
pub fn prior_exceedance(eps: f64, n: f64, prior: &Prior, params: &ConcentrationParams, grid_points: usize) -> Result<f64> {
    params.validate()?;
    prior.validate()?;
    let tail = 1.0 - prior.cdf(eps);
    let integral = match prior {
        Prior::Dirac { r } => {
            if *r <= eps {
                beta_unchecked(eps - r, n, params)
            } else {
                0.0
            }
        }
        Prior::None => 0.0,
        _ => {
            let g = |r: f64| beta_unchecked((eps - r).max(0.0), n, params);
            let mut nodes: Vec<f64> = (0..grid_points.max(2)).map(|i| eps * i as f64 / (grid_points.max(2) - 1) as f64).collect();
            // the concentration bound changes exponent at distance one
            if eps > 1.0 {
                nodes.push(eps - 1.0);
                nodes.sort_by(|a, b| a.total_cmp(b));
            }
            let mut total = g(0.0) * prior.cdf(0.0);
            for w in nodes.windows(2) {
                let df = prior.cdf(w[1]) - prior.cdf(w[0]);
                total += 0.5 * (g(w[0]) + g(w[1])) * df;
            }
            total
        }
    };
    Ok((integral + tail).clamp(0.0, 1.0))
}

/// Posterior significance level of the ball of radius `eps` around a
/// source, given the observed empirical distance `r_hat`.
#[allow(clippy::too_many_arguments)]
pub fn bayesian_beta(
    eps: f64,
    r_hat: f64,
    n1: f64,
    nk: f64,
    prior: &Prior,
    evidence: f64,
    params: &ConcentrationParams,
) -> Result<f64> {
    bayesian_beta_with_grid(eps, r_hat, n1, nk, prior, evidence, params, DEFAULT_GRID_POINTS)
}

#[allow(clippy::too_many_arguments)]
pub fn bayesian_beta_with_grid(
    eps: f64,
    r_hat: f64,
    n1: f64,
    nk: f64,
    prior: &Prior,
    evidence: f64,
    params: &ConcentrationParams,
    grid_points: usize,
) -> Result<f64> {
    if !(eps >= r_hat) {
        return Err(Error::PreconditionViolated(format!("radius {eps} below the observed distance {r_hat}")));
    }
    if !(evidence > 0.0 && evidence <= 1.0) {
        return Err(Error::PreconditionViolated(format!("evidence {evidence} must lie in (0, 1]")));
    }
    let likelihood = beta(eps - r_hat, n1, params)?;
    let prior_part = prior_exceedance(eps, nk, prior, params, grid_points)?;
    Ok((likelihood * prior_part / evidence).min(1.0))
}

/// Bisection for the smallest `eps >= lo` with `f(eps) <= target`, where
/// `f` is non-increasing.
fn invert_decreasing(lo: f64, target: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if f(lo)? <= target {
        return Ok(lo);
    }
    let mut width = 1.0;
    let mut hi = lo + width;
    let mut doublings = 0;
    while f(hi)? > target {
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Unreachable(target));
        }
        width *= 2.0;
        hi = lo + width;
    }
    let mut left = lo;
    for _ in 0..200 {
        let mid = 0.5 * (left + hi);
        if mid <= left || mid >= hi {
            break;
        }
        if f(mid)? <= target {
            hi = mid;
        } else {
            left = mid;
        }
    }
    Ok(hi)
}

/// Smallest radius whose Bayesian significance level is at most
/// `beta_target`.
#[allow(clippy::too_many_arguments)]
pub fn eps_bayesian(
    beta_target: f64,
    r_hat: f64,
    n1: f64,
    nk: f64,
    prior: &Prior,
    evidence: f64,
    params: &ConcentrationParams,
) -> Result<f64> {
    if !(beta_target > 0.0 && beta_target <= 1.0) {
        return Err(Error::PreconditionViolated(format!("beta {beta_target} must lie in (0, 1]")));
    }
    invert_decreasing(r_hat, beta_target, |eps| bayesian_beta(eps, r_hat, n1, nk, prior, evidence, params))
}

/// Radius from the prior bound alone, for when no target data exist.
pub fn eps_prior_only(beta_target: f64, nk: f64, prior: &Prior, params: &ConcentrationParams) -> Result<f64> {
    if !(beta_target > 0.0 && beta_target <= 1.0) {
        return Err(Error::PreconditionViolated(format!("beta {beta_target} must lie in (0, 1]")));
    }
    invert_decreasing(0.0, beta_target, |eps| prior_exceedance(eps, nk, prior, params, DEFAULT_GRID_POINTS))
}

/// Inputs of the five radius constructions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Known distances: the radii are the distances themselves.
    KnownDistances { r: Vec<f64> },
    /// Known source-target distances plus sampling error of each source.
    KnownShifts { r: Vec<f64>, betas: Vec<f64>, n: Vec<f64> },
    /// Empirical distances to the target sample plus the target's own
    /// sampling error; the first distribution is the target.
    Empirical { samples: Vec<DiscreteDistribution>, beta1: f64, norm: Norm, order: u32 },
    /// Bayesian update of a prior on each source-target distance; entry 0
    /// of `r_hat`, `priors` and `evidence` is ignored.
    Bayesian { r_hat: Vec<f64>, betas: Vec<f64>, n: Vec<f64>, priors: Vec<Prior>, evidence: Vec<f64> },
    /// No target data: prior bound only, one entry per source.
    PriorOnly { betas: Vec<f64>, n: Vec<f64>, priors: Vec<Prior> },
}

pub fn scenario_radii(scenario: &Scenario, params: &ConcentrationParams) -> Result<Vec<f64>> {
    let check = |a: usize, b: usize| {
        if a == b {
            Ok(())
        } else {
            Err(Error::PreconditionViolated(format!("expected {a} entries per input, found {b}")))
        }
    };
    match scenario {
        Scenario::KnownDistances { r } => {
            if r.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::PreconditionViolated("distances must be nonnegative".into()));
            }
            Ok(r.clone())
        }
        Scenario::KnownShifts { r, betas, n } => {
            check(r.len(), betas.len())?;
            check(r.len(), n.len())?;
            r.iter().zip(betas).zip(n).map(|((r, b), n)| Ok(r + eps_for_beta(*b, *n, params)?)).collect()
        }
        Scenario::Empirical { samples, beta1, norm, order } => {
            let first = samples.first().ok_or_else(|| Error::PreconditionViolated("no samples".into()))?;
            let base = eps_for_beta(*beta1, first.len() as f64, params)?;
            samples
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let w = if k == 0 { 0.0 } else { wasserstein_distance(first, s, *norm, *order)? };
                    Ok(w + base)
                })
                .collect()
        }
        Scenario::Bayesian { r_hat, betas, n, priors, evidence } => {
            let kk = betas.len();
            check(kk, n.len())?;
            check(kk, r_hat.len())?;
            check(kk, priors.len())?;
            check(kk, evidence.len())?;
            let mut out = vec![eps_for_beta(betas[0], n[0], params)?];
            for k in 1..kk {
                out.push(eps_bayesian(betas[k], r_hat[k], n[0], n[k], &priors[k], evidence[k], params)?);
            }
            Ok(out)
        }
        Scenario::PriorOnly { betas, n, priors } => {
            check(betas.len(), n.len())?;
            check(betas.len(), priors.len())?;
            (0..betas.len()).map(|k| eps_prior_only(betas[k], n[k], &priors[k], params)).collect()
        }
    }
}

/// Fits `log beta_hat ~ log c1 - c2 N eps^e` by least squares over the
/// observations `(eps, N, beta_hat)` with positive `beta_hat`, then lifts
/// `c1` so the fitted curve dominates every observation.
pub fn fit_concentration(observations: &[(f64, f64, f64)], base: &ConcentrationParams) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        observations.iter().filter(|o| o.2 > 0.0).map(|&(eps, n, b)| (n * eps.powf(base.exponent(eps)), b.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::PreconditionViolated("need at least two positive exceedance frequencies".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::PreconditionViolated("observations do not vary in N eps^e".into()));
    }
    let c2 = (-sxy / sxx).max(1e-12);
    let c1 = observations
        .iter()
        .map(|&(eps, n, b)| b * (c2 * n * eps.powf(base.exponent(eps))).exp())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    Ok((c1, c2))
}
