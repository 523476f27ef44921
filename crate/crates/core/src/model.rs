//! Problem data shared by the robust solvers: ambiguity sets, piecewise
//! affine losses and polyhedral supports.

use serde::{Deserialize, Serialize};

use crate::distribution::{DiscreteDistribution, GroundCost};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Source {
    pub center: DiscreteDistribution,
    pub radius: f64,
}

/// Intersection of `K` transport balls around discrete centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub cost: GroundCost,
    pub sources: Vec<Source>,
}

impl AmbiguitySpec {
    pub fn new(cost: GroundCost, sources: Vec<(DiscreteDistribution, f64)>) -> Result<Self> {
        let spec = Self { cost, sources: sources.into_iter().map(|(center, radius)| Source { center, radius }).collect() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.sources.first().ok_or_else(|| Error::InvalidInput("at least one source needed".into()))?;
        let d = first.center.dim();
        for s in &self.sources {
            if s.center.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: s.center.dim() });
            }
            if !(s.radius >= 0.0) || !s.radius.is_finite() {
                return Err(Error::InvalidInput(format!("radius {} must be finite and nonnegative", s.radius)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sources[0].center.dim()
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.sources.iter().map(|s| s.center.len()).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.radius).collect()
    }

    /// Anchor points `xi_hat_{k, alpha_k}` selected by a multi-index.
    pub fn anchors(&self, alpha: &[usize]) -> Vec<&[f64]> {
        self.sources.iter().zip(alpha).map(|(s, &j)| s.center.atom(j)).collect()
    }

    pub fn with_radii(&self, radii: &[f64]) -> Self {
        let mut out = self.clone();
        for (s, &r) in out.sources.iter_mut().zip(radii) {
            s.radius = r;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ambiguity spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffinePiece {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        dot(&self.a, xi) + self.b
    }
}

/// `l(xi) = max_l <a_l, xi> + b_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffineLoss {
    pub pieces: Vec<AffinePiece>,
}

impl PiecewiseAffineLoss {
    pub fn new(pieces: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let loss = Self { pieces: pieces.into_iter().map(|(a, b)| AffinePiece { a, b }).collect() };
        loss.validate(None)?;
        Ok(loss)
    }

    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        Self { pieces: vec![AffinePiece { a, b }] }
    }

    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        let first = self.pieces.first().ok_or_else(|| Error::InvalidInput("loss needs at least one piece".into()))?;
        let d = dim.unwrap_or(first.a.len());
        for p in &self.pieces {
            if p.a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.a.len() });
            }
            if !p.b.is_finite() || p.a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("loss coefficients must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.eval(xi)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { pieces: self.pieces.iter().map(|p| AffinePiece { a: p.a.iter().map(|v| s * v).collect(), b: s * p.b }).collect() }
    }
}

/// `{x : C x <= g}`; with no rows it is the whole space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polyhedron {
    #[serde(rename = "C", default)]
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub g: Vec<f64>,
}

impl Polyhedron {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn new(c: Vec<Vec<f64>>, g: Vec<f64>) -> Result<Self> {
        let p = Self { c, g };
        p.validate(None)?;
        Ok(p)
    }

    /// Axis-aligned box `lo <= x <= hi`; infinite entries are skipped.
    pub fn bounds(lo: &[f64], hi: &[f64]) -> Self {
        let d = lo.len();
        let mut c = Vec::new();
        let mut g = Vec::new();
        for i in 0..d {
            if hi[i].is_finite() {
                let mut row = vec![0.0; d];
                row[i] = 1.0;
                c.push(row);
                g.push(hi[i]);
            }
            if lo[i].is_finite() {
                let mut row = vec![0.0; d];
                row[i] = -1.0;
                c.push(row);
                g.push(-lo[i]);
            }
        }
        Self { c, g }
    }

    pub fn unit_box(d: usize) -> Self {
        Self::bounds(&vec![0.0; d], &vec![1.0; d])
    }

    pub fn nonnegative(d: usize) -> Self {
        Self::bounds(&vec![0.0; d], &vec![f64::INFINITY; d])
    }

    pub fn num_rows(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        if self.c.len() != self.g.len() {
            return Err(Error::InvalidInput(format!("{} rows in C but {} entries in g", self.c.len(), self.g.len())));
        }
        let d = dim.or_else(|| self.c.first().map(|r| r.len()));
        if let Some(d) = d {
            if let Some(r) = self.c.iter().find(|r| r.len() != d) {
                return Err(Error::DimensionMismatch { expected: d, found: r.len() });
            }
        }
        if self.g.iter().chain(self.c.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polyhedron entries must be finite".into()));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.c.iter().zip(&self.g).all(|(row, &g)| dot(row, x) <= g + tol)
    }

    /// Returns coordinate bounds when every row involves a single
    /// coordinate; `Ok(None)` for a general polyhedron.
    pub fn as_box(&self, d: usize) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut lo = vec![f64::NEG_INFINITY; d];
        let mut hi = vec![f64::INFINITY; d];
        for (row, &g) in self.c.iter().zip(&self.g) {
            let nz: Vec<usize> = (0..d).filter(|&i| row[i] != 0.0).collect();
            match nz.as_slice() {
                [] => {
                    if g < 0.0 {
                        return Err(Error::InvalidInput("support set is empty".into()));
                    }
                }
                [i] => {
                    let v = g / row[*i];
                    if row[*i] > 0.0 {
                        hi[*i] = hi[*i].min(v);
                    } else {
                        lo[*i] = lo[*i].max(v);
                    }
                }
                _ => return Ok(None),
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("support set is empty".into()));
        }
        Ok(Some((lo, hi)))
    }
}

/// One piece of a loss that is affine in a decision vector `theta`:
/// `<A theta + a0, xi> + <beta, theta> + b0`, with `A` stored row-major as
/// `d` rows of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPiece {
    pub a_theta: Vec<Vec<f64>>,
    pub a0: Vec<f64>,
    pub beta: Vec<f64>,
    pub b0: f64,
}

impl DecisionPiece {
    /// Slope in `xi` at a fixed decision.
    pub fn slope(&self, theta: &[f64]) -> Vec<f64> {
        self.a_theta.iter().zip(&self.a0).map(|(row, a0)| dot(row, theta) + a0).collect()
    }

    pub fn intercept(&self, theta: &[f64]) -> f64 {
        dot(&self.beta, theta) + self.b0
    }

    /// Coefficients of `theta` in the piece value at `xi`: `A^T xi + beta`.
    pub fn theta_gradient(&self, xi: &[f64]) -> Vec<f64> {
        let mut g = self.beta.clone();
        for (row, x) in self.a_theta.iter().zip(xi) {
            for (gj, r) in g.iter_mut().zip(row) {
                *gj += r * x;
            }
        }
        g
    }

    /// `A^T u` for a direction `u`.
    pub fn theta_direction(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.beta.len()];
        for (row, x) in self.a_theta.iter().zip(u) {
            for (gj, r) in g.iter_mut().zip(row) {
                *gj += r * x;
            }
        }
        g
    }
}

/// Piecewise affine loss whose pieces depend affinely on a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLoss {
    pub num_decisions: usize,
    pub pieces: Vec<DecisionPiece>,
}

impl DecisionLoss {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::InvalidInput("loss needs at least one piece".into()));
        }
        let n = self.num_decisions;
        for p in &self.pieces {
            if p.a0.len() != d || p.a_theta.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.a0.len() });
            }
            if p.beta.len() != n || p.a_theta.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, found: p.beta.len() });
            }
        }
        Ok(())
    }

    /// The loss with no decision variables.
    pub fn fixed(loss: &PiecewiseAffineLoss) -> Self {
        Self {
            num_decisions: 0,
            pieces: loss
                .pieces
                .iter()
                .map(|p| DecisionPiece { a_theta: vec![Vec::new(); p.a.len()], a0: p.a.clone(), beta: Vec::new(), b0: p.b })
                .collect(),
        }
    }

    pub fn at(&self, theta: &[f64]) -> PiecewiseAffineLoss {
        PiecewiseAffineLoss {
            pieces: self.pieces.iter().map(|p| AffinePiece { a: p.slope(theta), b: p.intercept(theta) }).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
