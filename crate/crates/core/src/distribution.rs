use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finitely supported probability distribution on R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    atoms: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.atoms, raw.probs)
    }
}

/// Tolerance on the total mass accepted from callers; the stored weights
/// are renormalized to sum to one.
const MASS_TOL: f64 = 1e-9;

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if atoms.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!("{} atoms but {} probabilities", atoms.len(), probs.len())));
        }
        let d = atoms[0].len();
        if d == 0 {
            return Err(Error::InvalidDistribution("atoms must have positive dimension".into()));
        }
        for a in &atoms {
            if a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.len() });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistribution("non-finite atom coordinate".into()));
            }
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution("probabilities must be strictly positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let probs = probs.into_iter().map(|p| p / total).collect();
        Ok(Self { atoms, probs })
    }

    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Builds a distribution from weighted points, dropping masses at or
    /// below `drop_tol` and merging atoms that agree coordinate-wise within
    /// `merge_tol`. Masses are rescaled to sum to one.
    pub fn from_weighted(points: Vec<(Vec<f64>, f64)>, merge_tol: f64, drop_tol: f64) -> Result<Self> {
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (x, w) in points {
            if w <= drop_tol {
                continue;
            }
            match atoms.iter().position(|a| a.iter().zip(&x).all(|(u, v)| (u - v).abs() <= merge_tol)) {
                Some(i) => probs[i] += w,
                None => {
                    atoms.push(x);
                    probs.push(w);
                }
            }
        }
        let total: f64 = probs.iter().sum();
        if atoms.is_empty() || !(total > 0.0) {
            return Err(Error::InvalidDistribution("no positive mass".into()));
        }
        let probs = probs.into_iter().map(|p| p / total).collect();
        Self::new(atoms, probs)
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j]
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms.iter().zip(&self.probs).map(|(a, p)| p * f(a)).sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (a, p) in self.atoms.iter().zip(&self.probs) {
            for (mi, ai) in m.iter_mut().zip(a) {
                *mi += p * ai;
            }
        }
        m
    }

    /// Total variance `E ||xi - E xi||^2`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expectation(|a| a.iter().zip(&m).map(|(x, y)| (x - y) * (x - y)).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn eval(self, v: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            Norm::L1 => v.into_iter().map(f64::abs).sum(),
            Norm::L2 => v.into_iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.into_iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Linf,
            Norm::L2 => Norm::L2,
            Norm::Linf => Norm::L1,
        }
    }

    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        self.eval(x.iter().zip(y).map(|(a, b)| a - b))
    }
}

/// Transportation cost `c(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCost", into = "RawCost")]
pub enum GroundCost {
    /// `||x - y||^p`.
    NormPower { norm: Norm, p: u32 },
    /// `||x - y||_2^2`.
    SqEuclidean,
}

#[derive(Serialize, Deserialize)]
struct RawCost {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm: Option<Norm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<u32>,
}

impl TryFrom<RawCost> for GroundCost {
    type Error = Error;

    fn try_from(raw: RawCost) -> Result<Self> {
        match raw.kind.as_deref() {
            Some("sq_euclidean") => Ok(GroundCost::SqEuclidean),
            Some("norm_power") | None => {
                let norm = raw.norm.ok_or_else(|| Error::InvalidInput("cost needs a norm".into()))?;
                let p = raw.p.unwrap_or(1);
                if p == 0 {
                    return Err(Error::InvalidInput("cost exponent must be at least 1".into()));
                }
                Ok(GroundCost::NormPower { norm, p })
            }
            Some(other) => Err(Error::InvalidInput(format!("unknown cost kind {other:?}"))),
        }
    }
}

impl From<GroundCost> for RawCost {
    fn from(c: GroundCost) -> Self {
        match c {
            GroundCost::SqEuclidean => RawCost { kind: Some("sq_euclidean".into()), norm: None, p: None },
            GroundCost::NormPower { norm, p } => RawCost { kind: None, norm: Some(norm), p: Some(p) },
        }
    }
}

impl GroundCost {
    pub const L1: GroundCost = GroundCost::NormPower { norm: Norm::L1, p: 1 };
    pub const LINF: GroundCost = GroundCost::NormPower { norm: Norm::Linf, p: 1 };

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            GroundCost::NormPower { norm, p } => norm.distance(x, y).powi(p as i32),
            GroundCost::SqEuclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
        }
    }

    /// The norm of a `p = 1` norm cost, which is what the robust LP
    /// reformulations accept.
    pub fn lp_norm(&self) -> Result<Norm> {
        match *self {
            GroundCost::NormPower { norm: n @ (Norm::L1 | Norm::Linf), p: 1 } => Ok(n),
            other => Err(Error::UnsupportedCost(format!("{other:?}: only l1 or linf norms with p = 1 are linear"))),
        }
    }
}
