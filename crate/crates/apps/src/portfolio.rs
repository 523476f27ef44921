//! Mean-CVaR portfolio selection under an intersection of l1 transport
//! balls.

use msdro_core::msdro::solve_msdro_with;
use msdro_core::{AmbiguitySpec, DecisionLoss, DecisionPiece, Error, GroundCost, MsdroOptions, Polyhedron, Result};

#[derive(Debug, Clone)]
pub struct PortfolioSpec {
    pub rho: f64,
    /// CVaR level in `(0, 1]`.
    pub eta: f64,
    pub ambiguity: AmbiguitySpec,
}

#[derive(Debug, Clone)]
pub struct PortfolioSolution {
    pub weights: Vec<f64>,
    pub tau: f64,
    pub objective: f64,
}

impl PortfolioSpec {
    pub fn new(rho: f64, eta: f64, ambiguity: AmbiguitySpec) -> Result<Self> {
        let spec = Self { rho, eta, ambiguity };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) || !(self.rho >= 0.0) {
            return Err(Error::InvalidInput(format!("need eta in (0, 1] and rho >= 0, got {} and {}", self.eta, self.rho)));
        }
        if self.ambiguity.cost != GroundCost::L1 {
            return Err(Error::UnsupportedCost("portfolio model uses the l1 transport cost".into()));
        }
        self.ambiguity.validate()
    }

    pub fn dim(&self) -> usize {
        self.ambiguity.dim()
    }

    /// `(a_t, b_t)` for the two pieces `a_t <theta, xi> + b_t tau`.
    pub fn coefficients(&self) -> [(f64, f64); 2] {
        [(-1.0, self.rho), (-1.0 - self.rho / self.eta, self.rho * (1.0 - 1.0 / self.eta))]
    }

    /// The loss as a function of `(theta, tau)`, decisions ordered as
    /// `theta_1..theta_d, tau`.
    pub fn loss(&self) -> DecisionLoss {
        let d = self.dim();
        let pieces = self
            .coefficients()
            .iter()
            .map(|&(a, b)| {
                let a_theta = (0..d)
                    .map(|i| {
                        let mut row = vec![0.0; d + 1];
                        row[i] = a;
                        row
                    })
                    .collect();
                let mut beta = vec![0.0; d + 1];
                beta[d] = b;
                DecisionPiece { a_theta, a0: vec![0.0; d], beta, b0: 0.0 }
            })
            .collect();
        DecisionLoss { num_decisions: d + 1, pieces }
    }

    /// Unit simplex in `theta`, `tau` free.
    pub fn decision_set(&self) -> Polyhedron {
        let d = self.dim();
        let mut c = Vec::new();
        let mut g = Vec::new();
        for i in 0..d {
            let mut row = vec![0.0; d + 1];
            row[i] = -1.0;
            c.push(row);
            g.push(0.0);
        }
        let mut sum = vec![1.0; d + 1];
        sum[d] = 0.0;
        c.push(sum.clone());
        g.push(1.0);
        c.push(sum.iter().map(|v| -v).collect());
        g.push(-1.0);
        Polyhedron { c, g }
    }

    /// Realized loss of a decision on one return scenario.
    pub fn scenario_loss(&self, weights: &[f64], tau: f64, xi: &[f64]) -> f64 {
        let ret: f64 = weights.iter().zip(xi).map(|(w, x)| w * x).sum();
        self.coefficients().iter().map(|&(a, b)| a * ret + b * tau).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn portfolio_solve(spec: &PortfolioSpec) -> Result<PortfolioSolution> {
    portfolio_solve_with(spec, &MsdroOptions::default())
}

pub fn portfolio_solve_with(spec: &PortfolioSpec, opts: &MsdroOptions) -> Result<PortfolioSolution> {
    spec.validate()?;
    let d = spec.dim();
    let sol = solve_msdro_with(&spec.ambiguity, &spec.loss(), &spec.decision_set(), &Polyhedron::free(), opts)?;
    let mut weights: Vec<f64> = sol.theta[..d].iter().map(|w| w.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(PortfolioSolution { weights, tau: sol.theta[d], objective: sol.value })
}

/// Radii `lambda (1 + m) W` and `(1 - lambda) (1 + m) W`.
pub fn split_radii(lambda: f64, m: f64, distance: f64) -> [f64; 2] {
    [lambda * (1.0 + m) * distance, (1.0 - lambda) * (1.0 + m) * distance]
}
