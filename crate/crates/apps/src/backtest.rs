//! Out-of-sample comparison of single-source and multi-source robust
//! portfolios on the synthetic factor models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use msdro_core::{barycenter, barycenter_objective, AmbiguitySpec, DiscreteDistribution, GroundCost, Result};

use crate::portfolio::{portfolio_solve, split_radii, PortfolioSpec};
use crate::sensitivity::{ETA, RHO};
use crate::synthetic::{
    backtest_means, empirical, generate, stream_rng, SpreadConvention, SyntheticModel, FACTOR_SPREAD, IDIOSYNCRATIC_SPREAD,
};

pub const METHODS: [&str; 5] = ["target", "source", "pooled", "barycenter", "multi-source"];
pub const METRICS: [&str; 3] = ["sharpe", "mean", "sd"];

const STREAM_TARGET: u64 = 0;
const STREAM_SOURCE: u64 = 1;
const STREAM_VALIDATION: u64 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: usize,
    pub lambda_grid: Vec<f64>,
    pub m_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub n_target: usize,
    pub n_source: usize,
    pub n_validation: usize,
    pub target_model: SyntheticModel,
    pub source_model: SyntheticModel,
    pub convention: SpreadConvention,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 10,
            lambda_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            m_grid: vec![0.002, 0.005, 0.01, 0.02],
            eps_grid: vec![0.005, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0],
            n_target: 5,
            n_source: 30,
            n_validation: 5,
            target_model: SyntheticModel::BacktestModel1,
            source_model: SyntheticModel::BacktestModel2,
            convention: SpreadConvention::StdDev,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.replications > 0
            && !self.lambda_grid.is_empty()
            && !self.m_grid.is_empty()
            && !self.eps_grid.is_empty()
            && self.n_target > 0
            && self.n_source > 0
            && self.n_validation > 0;
        if ok {
            Ok(())
        } else {
            Err(msdro_core::Error::InvalidInput("grids, sample sizes and replication count must be nonempty".into()))
        }
    }
}

/// Return statistics of a fixed portfolio under a factor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Performance {
    pub mean: f64,
    pub sd: f64,
    pub sharpe: f64,
}

impl Performance {
    pub fn metric(&self, name: &str) -> f64 {
        match name {
            "sharpe" => self.sharpe,
            "mean" => self.mean,
            _ => self.sd,
        }
    }
}

/// Exact mean and standard deviation of `<theta, xi>` when
/// `xi_i = psi + zeta_i`.
pub fn analytic_performance(weights: &[f64], model: SyntheticModel, convention: SpreadConvention) -> Performance {
    let means = backtest_means(model);
    let mean: f64 = weights.iter().zip(&means).map(|(w, r)| w * r).sum();
    let total: f64 = weights.iter().sum();
    let sf = convention.sd(FACTOR_SPREAD);
    let si = convention.sd(IDIOSYNCRATIC_SPREAD);
    let var = total * total * sf * sf + weights.iter().map(|w| w * w).sum::<f64>() * si * si;
    let sd = var.sqrt();
    Performance { mean, sd, sharpe: mean / sd }
}

#[derive(Debug, Clone)]
pub struct ReplicationResult {
    /// Chosen weights per method, in `METHODS` order.
    pub weights: Vec<Vec<f64>>,
    pub performance: Vec<Performance>,
}

#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub replications: Vec<ReplicationResult>,
    /// `[metric][method] -> (mean, standard error)`.
    pub summary: Vec<Vec<(f64, f64)>>,
}

fn average_return(weights: &[f64], validation: &[Vec<f64>]) -> f64 {
    validation.iter().map(|x| weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).sum::<f64>() / validation.len() as f64
}

fn single_source(center: &DiscreteDistribution, eps: f64) -> Result<PortfolioSpec> {
    PortfolioSpec::new(RHO, ETA, AmbiguitySpec::new(GroundCost::L1, vec![(center.clone(), eps)])?)
}

/// Best candidate by validation average return; ties keep the earlier one.
fn pick(cands: Vec<(Vec<f64>, f64)>) -> Vec<f64> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (w, score) in cands {
        if best.as_ref().is_none_or(|b| score > b.1) {
            best = Some((w, score));
        }
    }
    best.map(|b| b.0).unwrap_or_default()
}

fn tune_single(center: &DiscreteDistribution, eps_grid: &[f64], validation: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let mut cands = Vec::with_capacity(eps_grid.len());
    let mut taus = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let sol = portfolio_solve(&single_source(center, eps)?)?;
        let score = average_return(&sol.weights, validation);
        taus.push((sol.weights.clone(), sol.tau));
        cands.push((sol.weights, score));
    }
    let w = pick(cands);
    let tau = taus.into_iter().find(|t| t.0 == w).map(|t| t.1).unwrap_or(0.0);
    Ok((w, tau))
}

pub fn run_replication(config: &ExperimentConfig, replication: u64) -> Result<ReplicationResult> {
    let conv = config.convention;
    let target = generate(config.target_model, config.n_target, &mut stream_rng(config.seed, replication, STREAM_TARGET), conv);
    let source = generate(config.source_model, config.n_source, &mut stream_rng(config.seed, replication, STREAM_SOURCE), conv);
    let validation =
        generate(config.target_model, config.n_validation, &mut stream_rng(config.seed, replication, STREAM_VALIDATION), conv);
    let p1 = empirical(target.clone());
    let p2 = empirical(source.clone());
    let pooled = empirical(target.into_iter().chain(source).collect());

    let (w_target, _) = tune_single(&p1, &config.eps_grid, &validation)?;
    let (w_source, _) = tune_single(&p2, &config.eps_grid, &validation)?;
    let (w_pooled, _) = tune_single(&pooled, &config.eps_grid, &validation)?;

    // With equal weights both empirical distributions are l1 barycenters;
    // keep the one whose tuned portfolio has the smaller validation risk.
    let dists = [p1.clone(), p2.clone()];
    let optimum = barycenter(&dists, &[0.5, 0.5], &GroundCost::L1)?.objective;
    let mut w_bary = Vec::new();
    let mut best_risk = f64::INFINITY;
    for cand in &dists {
        let value = barycenter_objective(cand, &dists, &[0.5, 0.5], &GroundCost::L1)?;
        if value > optimum + 1e-9 * (1.0 + optimum.abs()) {
            continue;
        }
        let (w, tau) = tune_single(cand, &config.eps_grid, &validation)?;
        let spec = single_source(cand, 0.0)?;
        let risk = validation.iter().map(|x| spec.scenario_loss(&w, tau, x)).sum::<f64>() / validation.len() as f64;
        if risk < best_risk {
            best_risk = risk;
            w_bary = w;
        }
    }

    let distance = msdro_core::wasserstein_distance(&p1, &p2, msdro_core::Norm::L1, 1)?;
    let mut cands = Vec::new();
    for &lambda in &config.lambda_grid {
        for &m in &config.m_grid {
            let [e1, e2] = split_radii(lambda, m, distance);
            let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p1.clone(), e1), (p2.clone(), e2)])?;
            let sol = portfolio_solve(&PortfolioSpec::new(RHO, ETA, amb)?)?;
            let score = average_return(&sol.weights, &validation);
            cands.push((sol.weights, score));
        }
    }
    let w_multi = pick(cands);

    let weights = vec![w_target, w_source, w_pooled, w_bary, w_multi];
    let performance = weights.iter().map(|w| analytic_performance(w, config.target_model, conv)).collect();
    Ok(ReplicationResult { weights, performance })
}

/// Runs all replications in parallel, each with its own seeded streams,
/// and aggregates in replication order.
pub fn run_backtest(config: &ExperimentConfig) -> Result<BacktestReport> {
    config.validate()?;
    let results: Vec<Result<ReplicationResult>> =
        (0..config.replications as u64).into_par_iter().map(|r| run_replication(config, r)).collect();
    let replications = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = replications.len() as f64;
    let summary = METRICS
        .iter()
        .map(|metric| {
            (0..METHODS.len())
                .map(|j| {
                    let vals: Vec<f64> = replications.iter().map(|r| r.performance[j].metric(metric)).collect();
                    let mean = vals.iter().sum::<f64>() / n;
                    let se = if vals.len() > 1 {
                        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
                    } else {
                        0.0
                    };
                    (mean, se)
                })
                .collect()
        })
        .collect();
    Ok(BacktestReport { replications, summary })
}

impl BacktestReport {
    /// Rows `metric, statistic, <one column per method>`.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["metric".to_string(), "statistic".to_string()];
        header.extend(METHODS.iter().map(|m| m.to_string()));
        let mut rows = Vec::new();
        for (i, metric) in METRICS.iter().enumerate() {
            for (stat, pick) in [("mean", 0), ("stderr", 1)] {
                let mut row = vec![metric.to_string(), stat.to_string()];
                row.extend(self.summary[i].iter().map(|c| if pick == 0 { c.0 } else { c.1 }.to_string()));
                rows.push(row);
            }
        }
        (header, rows)
    }
}
