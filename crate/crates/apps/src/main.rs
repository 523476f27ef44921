use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use msdro_apps::assortment::{assortment_solve, AssortmentSpec};
use msdro_apps::backtest::{run_backtest, ExperimentConfig};
use msdro_apps::bias::barycenter_bias_demo;
use msdro_apps::portfolio::{portfolio_solve, PortfolioSpec};
use msdro_apps::report::{serialize_rows, table_to_string};
use msdro_apps::sensitivity::{sweep, SensitivityData, SAMPLES_PER_SOURCE};
use msdro_apps::synthetic::{empirical, region_demands, stream_rng, SpreadConvention};
use msdro_core::calibration::{bayesian_beta, scenario_radii};
use msdro_core::{
    barycenter, ot_cost, solve_msdro, wasserstein_distance, worst_case_distribution, worst_case_value, AmbiguitySpec,
    ConcentrationParams, DecisionLoss, DiscreteDistribution, Error, GroundCost, Norm, PiecewiseAffineLoss, Polyhedron, Prior,
    Scenario,
};

#[derive(Parser)]
#[command(name = "msdro", version, about = "Multi-source Wasserstein DRO toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON input file
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// CSV output path
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Radii, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    m: Vec<f64>,
    /// Grid of radii for sweeps, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal transport cost between two distributions
    Ot,
    /// Weighted barycenter of several distributions
    Barycenter,
    /// Worst-case expected loss over the intersection of balls
    DroValue,
    /// Worst-case distribution attaining the robust value
    DroWorstcase,
    /// Robust decision for a loss affine in the decision
    DroSolve,
    /// Radii from a calibration scenario, or a significance curve over --grid
    Calibrate,
    /// Mean-CVaR portfolio over the simplex
    Portfolio {
        #[arg(long, default_value = "std-dev")]
        convention: Convention,
    },
    /// Robust assortment selection
    Assortment,
    /// Out-of-sample comparison on the synthetic factor models
    Backtest {
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        convention: Option<Convention>,
    },
    /// Monte Carlo variance of the empirical barycenter of two Gaussians
    BiasDemo {
        #[arg(long, default_value_t = 0.0)]
        mu1: f64,
        #[arg(long, default_value_t = 1.0)]
        mu2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        runs: usize,
    },
    /// Portfolio weights over a (lambda, m) grid in long format
    Sensitivity {
        #[arg(long, default_value_t = SAMPLES_PER_SOURCE)]
        samples: usize,
        #[arg(long, default_value = "std-dev")]
        convention: Convention,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Convention {
    StdDev,
    Variance,
}

impl From<Convention> for SpreadConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::StdDev => SpreadConvention::StdDev,
            Convention::Variance => SpreadConvention::Variance,
        }
    }
}

#[derive(Deserialize)]
struct OtInput {
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    #[serde(default = "l1")]
    cost: GroundCost,
}

#[derive(Deserialize)]
struct BarycenterInput {
    distributions: Vec<DiscreteDistribution>,
    weights: Vec<f64>,
    #[serde(default = "l1")]
    cost: GroundCost,
}

#[derive(Deserialize)]
struct DroInput {
    ambiguity: AmbiguitySpec,
    loss: PiecewiseAffineLoss,
    #[serde(default)]
    support: Polyhedron,
}

#[derive(Deserialize)]
struct SolveInput {
    ambiguity: AmbiguitySpec,
    loss: DecisionLoss,
    #[serde(default)]
    decisions: Polyhedron,
    #[serde(default)]
    support: Polyhedron,
}

#[derive(Deserialize)]
struct CalibrateInput {
    params: ConcentrationParams,
    scenario: Option<Scenario>,
    curve: Option<CurveInput>,
}

#[derive(Deserialize)]
struct CurveInput {
    r_hat: f64,
    n1: f64,
    nk: f64,
    prior: Prior,
    #[serde(default = "unit")]
    evidence: f64,
}

#[derive(Deserialize)]
struct PortfolioInput {
    rho: f64,
    eta: f64,
    ambiguity: AmbiguitySpec,
}

fn l1() -> GroundCost {
    GroundCost::L1
}

fn unit() -> f64 {
    1.0
}

fn read_input<T: DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    let path = path.context("this command needs --input <json>")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_optional<T: DeserializeOwned>(path: Option<&Path>) -> Result<Option<T>> {
    path.map(|p| read_input(Some(p))).transpose()
}

fn emit_csv(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_csv(out: Option<&Path>, text: &str) -> Result<()> {
    if let Some(path) = out {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn with_radii(amb: AmbiguitySpec, eps: &[f64]) -> Result<AmbiguitySpec> {
    if eps.is_empty() {
        return Ok(amb);
    }
    if eps.len() != amb.num_sources() {
        bail!("--eps has {} values but there are {} sources", eps.len(), amb.num_sources());
    }
    Ok(amb.with_radii(eps))
}

fn distribution_csv(dist: &DiscreteDistribution) -> Result<String> {
    let mut header: Vec<String> = (1..=dist.dim()).map(|i| format!("x{i}")).collect();
    header.push("prob".into());
    let rows: Vec<Vec<String>> = dist
        .atoms()
        .iter()
        .zip(dist.probs())
        .map(|(a, p)| a.iter().map(|v| v.to_string()).chain(std::iter::once(p.to_string())).collect())
        .collect();
    Ok(table_to_string(&header, &rows))
}

fn first_or(v: &[f64], default: f64) -> f64 {
    v.first().copied().unwrap_or(default)
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e.downcast_ref::<Error>().is_some_and(|e| matches!(e, Error::IntersectionEmpty(_)));
            std::process::exit(if infeasible { 2 } else { 1 });
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let input = c.input.as_deref();
    let out = c.out.as_deref();
    match cli.command {
        Command::Ot => {
            let inp: OtInput = read_input(input)?;
            let res = ot_cost(&inp.p, &inp.q, &inp.cost)?;
            let rows: Vec<Vec<String>> =
                res.plan.entries.iter().map(|(i, j, m)| vec![i.to_string(), j.to_string(), m.to_string()]).collect();
            write_csv(out, &table_to_string(&["source".into(), "target".into(), "mass".into()], &rows))?;
            print_json(&json!({ "value": res.value, "plan": res.plan.entries }))
        }
        Command::Barycenter => {
            let inp: BarycenterInput = read_input(input)?;
            let res = barycenter(&inp.distributions, &inp.weights, &inp.cost)?;
            write_csv(out, &distribution_csv(&res.barycenter)?)?;
            print_json(&json!({ "objective": res.objective, "barycenter": res.barycenter }))
        }
        Command::DroValue => {
            let inp: DroInput = read_input(input)?;
            let amb = with_radii(inp.ambiguity, &c.eps)?;
            let dual = worst_case_value(&amb, &inp.loss, &inp.support).map_err(certificate_report)?;
            print_json(&json!({ "value": dual.value, "lambda": dual.lambda, "gamma": dual.gamma }))
        }
        Command::DroWorstcase => {
            let inp: DroInput = read_input(input)?;
            let amb = with_radii(inp.ambiguity, &c.eps)?;
            let wc = worst_case_distribution(&amb, &inp.loss, &inp.support).map_err(certificate_report)?;
            write_csv(out, &distribution_csv(&wc.distribution)?)?;
            print_json(&json!({
                "expected_loss": wc.expected_loss,
                "dual_value": wc.dual_value,
                "budgets_used": wc.budgets_used,
                "support_bound": wc.support_bound,
                "distribution": wc.distribution,
            }))
        }
        Command::DroSolve => {
            let inp: SolveInput = read_input(input)?;
            let amb = with_radii(inp.ambiguity, &c.eps)?;
            let sol = solve_msdro(&amb, &inp.loss, &inp.decisions, &inp.support).map_err(certificate_report)?;
            print_json(&json!({ "theta": sol.theta, "value": sol.value, "lambda": sol.dual.lambda }))
        }
        Command::Calibrate => {
            let inp: CalibrateInput = read_input(input)?;
            if inp.scenario.is_none() && inp.curve.is_none() {
                bail!("calibration input needs a scenario or a curve");
            }
            // the curve goes to --out, or to stdout when there are no radii to report
            if let Some(curve) = &inp.curve {
                if c.grid.is_empty() {
                    bail!("a significance curve needs --grid");
                }
                let mut rows = Vec::with_capacity(c.grid.len());
                for &eps in &c.grid {
                    let b = bayesian_beta(eps, curve.r_hat, curve.n1, curve.nk, &curve.prior, curve.evidence, &inp.params)?;
                    rows.push(vec![eps.to_string(), b.to_string()]);
                }
                let text = table_to_string(&["eps".into(), "beta".into()], &rows);
                if inp.scenario.is_some() {
                    write_csv(out, &text)?;
                } else {
                    emit_csv(out, &text)?;
                }
            }
            match &inp.scenario {
                Some(scenario) => print_json(&json!({ "radii": scenario_radii(scenario, &inp.params)? })),
                None => Ok(()),
            }
        }
        Command::Portfolio { convention } => {
            let spec = match read_optional::<PortfolioInput>(input)? {
                Some(inp) => PortfolioSpec::new(inp.rho, inp.eta, with_radii(inp.ambiguity, &c.eps)?)?,
                None => {
                    let data = SensitivityData::generate(c.seed, SAMPLES_PER_SOURCE, convention.into())?;
                    let spec = data.spec(first_or(&c.lambda, 0.5), first_or(&c.m, 1.0))?;
                    PortfolioSpec { ambiguity: with_radii(spec.ambiguity, &c.eps)?, ..spec }
                }
            };
            let sol = portfolio_solve(&spec)?;
            let rows: Vec<Vec<String>> =
                sol.weights.iter().enumerate().map(|(i, w)| vec![(i + 1).to_string(), w.to_string()]).collect();
            write_csv(out, &table_to_string(&["asset".into(), "weight".into()], &rows))?;
            print_json(&json!({ "weights": sol.weights, "tau": sol.tau, "objective": sol.objective }))
        }
        Command::Assortment => {
            let spec = match read_optional::<AssortmentSpec>(input)? {
                Some(spec) => AssortmentSpec { ambiguity: with_radii(spec.ambiguity, &c.eps)?, ..spec },
                None => synthetic_assortment(c.seed, &c.eps)?,
            };
            let sol = assortment_solve(&spec)?;
            let selected: Vec<usize> = sol.selection.iter().map(|i| i + 1).collect();
            let rows: Vec<Vec<String>> = (0..spec.prices.len())
                .map(|i| vec![(i + 1).to_string(), u8::from(sol.selection.contains(&i)).to_string()])
                .collect();
            write_csv(out, &table_to_string(&["product".into(), "selected".into()], &rows))?;
            print_json(&json!({
                "selection": selected,
                "revenue": sol.revenue,
                "supports_evaluated": sol.supports_evaluated,
            }))
        }
        Command::Backtest { replications, convention } => {
            let mut config: ExperimentConfig = read_optional(input)?.unwrap_or_default();
            if input.is_none() || c.seed != 0 {
                config.seed = c.seed;
            }
            if let Some(r) = replications {
                config.replications = r;
            }
            if let Some(conv) = convention {
                config.convention = conv.into();
            }
            if !c.grid.is_empty() {
                config.eps_grid = c.grid.clone();
            }
            if !c.lambda.is_empty() {
                config.lambda_grid = c.lambda.clone();
            }
            if !c.m.is_empty() {
                config.m_grid = c.m.clone();
            }
            let report = run_backtest(&config)?;
            let (header, rows) = report.table();
            emit_csv(out, &table_to_string(&header, &rows))
        }
        Command::BiasDemo { mu1, mu2, sigma, samples, runs } => {
            let r = barycenter_bias_demo((mu1, mu2), sigma, samples, runs, c.seed)?;
            let header: Vec<String> =
                ["mean_variance", "true_variance", "runs", "std_error", "t_statistic", "p_value"].map(String::from).into();
            let row = vec![
                r.mean_variance.to_string(),
                r.true_variance.to_string(),
                r.runs.to_string(),
                r.std_error.to_string(),
                r.t_statistic.to_string(),
                r.p_value.to_string(),
            ];
            write_csv(out, &table_to_string(&header, &[row]))?;
            print_json(&json!({
                "mean_variance": r.mean_variance,
                "true_variance": r.true_variance,
                "runs": r.runs,
                "std_error": r.std_error,
                "t_statistic": r.t_statistic,
                "p_value": r.p_value,
            }))
        }
        Command::Sensitivity { samples, convention } => {
            let data = SensitivityData::generate(c.seed, samples, convention.into())?;
            let lambdas = if c.lambda.is_empty() { (0..=10).map(|i| i as f64 / 10.0).collect() } else { c.lambda.clone() };
            let ms = if c.m.is_empty() { vec![0.01, 0.1, 1.0, 100.0] } else { c.m.clone() };
            let rows = sweep(&data, &lambdas, &ms)?;
            emit_csv(out, &serialize_rows(&rows)?)
        }
    }
}

fn certificate_report(e: Error) -> anyhow::Error {
    if let Error::IntersectionEmpty(cert) = &e {
        let v = json!({
            "status": "intersection_empty",
            "lambda_inf": cert.lambda_inf,
            "gamma_inf": cert.gamma_inf,
            "slope": cert.slope,
        });
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    }
    e.into()
}

/// Three demand regions; the target has a handful of samples and each
/// source ball is centered at a larger source sample with its radius set to
/// the empirical distance to the target sample unless `eps` overrides it.
fn synthetic_assortment(seed: u64, eps: &[f64]) -> Result<AssortmentSpec> {
    let d = 6;
    let target = empirical(region_demands(0, d, 5, &mut stream_rng(seed, 0, 0)));
    let mut sources = Vec::new();
    for k in 1..=2 {
        let sample = empirical(region_demands(k, d, 20, &mut stream_rng(seed, 0, k as u64)));
        let r = match eps.get(k - 1) {
            Some(&r) => r,
            None => wasserstein_distance(&sample, &target, Norm::L1, 1)?,
        };
        sources.push((sample, r));
    }
    let ambiguity = AmbiguitySpec::new(GroundCost::L1, sources)?;
    let prices = (0..d).map(|i| 1.0 + 0.25 * i as f64).collect();
    Ok(AssortmentSpec { prices, capacity: 2, ambiguity })
}
