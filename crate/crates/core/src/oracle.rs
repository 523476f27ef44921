//! Generalized Moreau envelope of a piecewise affine loss, the separation
//! oracle for the dual feasible set it induces, and a central-cut
//! ellipsoid method built on that oracle.
//!
//! Dual points are flattened as `(lambda_1..lambda_K, gamma_1, ..., gamma_K)`
//! with `gamma_k` of length `N_k`. Halfspaces are stored as
//! `<normal, v> <= rhs`.

use msdro_lp::{solve_lp, LpBuilder, LpStatus, RowSense, Sense};

use crate::distribution::{GroundCost, Norm};
use crate::error::{Error, Result};
use crate::model::{dot, AmbiguitySpec, PiecewiseAffineLoss, Polyhedron};
use crate::multi_index::MultiIndices;

#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub rhs: f64,
}

impl Halfspace {
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        dot(&self.normal, v) <= self.rhs + tol
    }
}

/// Maximum of `<a, xi> + b - sum_k lambda_k ||xi - anchor_k||` over the
/// support for a single affine piece.
#[derive(Debug, Clone, PartialEq)]
pub enum PieceEnvelope {
    Finite {
        value: f64,
        maximizer: Vec<f64>,
    },
    /// Recession direction of the support along which the objective grows,
    /// normalized to unit cost norm.
    Unbounded {
        direction: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoreauResult {
    /// `f64::INFINITY` when some piece is unbounded.
    pub value: f64,
    pub maximizer: Option<Vec<f64>>,
    /// Piece attaining the value (or the first unbounded piece).
    pub piece: usize,
    /// Unit direction of unboundedness.
    pub direction: Option<Vec<f64>>,
    /// When infinite, a halfspace over `lambda` that every multiplier with
    /// a finite envelope satisfies but the query violates.
    pub halfspace: Option<Halfspace>,
}

impl MoreauResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

pub fn moreau_envelope(
    lambda: &[f64],
    anchors: &[&[f64]],
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
    cost: &GroundCost,
) -> Result<MoreauResult> {
    let norm = cost.lp_norm()?;
    if let Some(k) = lambda.iter().position(|&l| l < 0.0 || l.is_nan()) {
        return Err(Error::NegativeLambda(k));
    }
    if lambda.len() != anchors.len() {
        return Err(Error::InvalidInput("one multiplier per anchor required".into()));
    }
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for (l, piece) in loss.pieces.iter().enumerate() {
        match piece_envelope(lambda, anchors, &piece.a, piece.b, support, norm)? {
            PieceEnvelope::Unbounded { direction } => {
                let halfspace = Halfspace { normal: vec![-1.0; lambda.len()], rhs: -dot(&piece.a, &direction) };
                return Ok(MoreauResult {
                    value: f64::INFINITY,
                    maximizer: None,
                    piece: l,
                    direction: Some(direction),
                    halfspace: Some(halfspace),
                });
            }
            PieceEnvelope::Finite { value, maximizer } => {
                if best.as_ref().is_none_or(|b| value > b.0) {
                    best = Some((value, maximizer, l));
                }
            }
        }
    }
    let (value, maximizer, piece) = best.ok_or_else(|| Error::InvalidInput("loss has no pieces".into()))?;
    Ok(MoreauResult { value, maximizer: Some(maximizer), piece, direction: None, halfspace: None })
}

/// Envelope of one affine piece. Uses a per-coordinate closed form for the
/// l1 cost over boxes and an epigraph LP otherwise.
pub fn piece_envelope(
    lambda: &[f64],
    anchors: &[&[f64]],
    a: &[f64],
    b: f64,
    support: &Polyhedron,
    norm: Norm,
) -> Result<PieceEnvelope> {
    let d = a.len();
    if norm == Norm::L1 {
        if let Some((lo, hi)) = support.as_box(d)? {
            return Ok(l1_box_envelope(lambda, anchors, a, b, &lo, &hi));
        }
    }
    lp_envelope(lambda, anchors, a, b, support, norm)
}

fn l1_box_envelope(lambda: &[f64], anchors: &[&[f64]], a: &[f64], b: f64, lo: &[f64], hi: &[f64]) -> PieceEnvelope {
    let total: f64 = lambda.iter().sum();
    let d = a.len();
    // steepest unbounded coordinate first
    let mut steepest: Option<(f64, usize, f64)> = None;
    for i in 0..d {
        if hi[i] == f64::INFINITY && a[i] - total > steepest.map_or(0.0, |s| s.0) {
            steepest = Some((a[i] - total, i, 1.0));
        }
        if lo[i] == f64::NEG_INFINITY && -a[i] - total > steepest.map_or(0.0, |s| s.0) {
            steepest = Some((-a[i] - total, i, -1.0));
        }
    }
    if let Some((_, i, sign)) = steepest {
        let mut u = vec![0.0; d];
        u[i] = sign;
        return PieceEnvelope::Unbounded { direction: u };
    }
    let mut xi = vec![0.0; d];
    let mut value = b;
    for i in 0..d {
        let f = |x: f64| a[i] * x - lambda.iter().zip(anchors).map(|(l, p)| l * (x - p[i]).abs()).sum::<f64>();
        let mut best: Option<(f64, f64)> = None;
        let candidates =
            anchors.iter().map(|p| p[i].clamp(lo[i], hi[i])).chain([lo[i], hi[i]].into_iter().filter(|v| v.is_finite()));
        for x in candidates {
            let v = f(x);
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, x));
            }
        }
        let (v, x) = best.unwrap_or((0.0, 0.0));
        xi[i] = x;
        value += v;
    }
    PieceEnvelope::Finite { value, maximizer: xi }
}

fn lp_envelope(lambda: &[f64], anchors: &[&[f64]], a: &[f64], b: f64, support: &Polyhedron, norm: Norm) -> Result<PieceEnvelope> {
    let d = a.len();
    let mut bld = LpBuilder::new(Sense::Maximize);
    let xi: Vec<usize> = (0..d).map(|i| bld.add_free_var(a[i])).collect();
    for (k, anchor) in anchors.iter().enumerate() {
        if lambda[k] == 0.0 {
            continue;
        }
        match norm {
            Norm::L1 => {
                for i in 0..d {
                    let s = bld.add_nonneg_var(-lambda[k]);
                    bld.add_constraint(&[(xi[i], 1.0), (s, -1.0)], RowSense::Le, anchor[i]);
                    bld.add_constraint(&[(xi[i], -1.0), (s, -1.0)], RowSense::Le, -anchor[i]);
                }
            }
            Norm::Linf => {
                let t = bld.add_nonneg_var(-lambda[k]);
                for i in 0..d {
                    bld.add_constraint(&[(xi[i], 1.0), (t, -1.0)], RowSense::Le, anchor[i]);
                    bld.add_constraint(&[(xi[i], -1.0), (t, -1.0)], RowSense::Le, -anchor[i]);
                }
            }
            Norm::L2 => return Err(Error::UnsupportedCost("l2 transport cost is not linear".into())),
        }
    }
    for (row, &g) in support.c.iter().zip(&support.g) {
        let entries: Vec<(usize, f64)> = row.iter().enumerate().map(|(i, &v)| (xi[i], v)).collect();
        bld.add_constraint(&entries, RowSense::Le, g);
    }
    let model = bld.build()?;
    let sol = solve_lp(&model)?;
    match sol.status {
        LpStatus::Optimal => {
            let maximizer = sol.x[..d].to_vec();
            let value =
                dot(a, &maximizer) + b - lambda.iter().zip(anchors).map(|(l, p)| l * norm.distance(&maximizer, p)).sum::<f64>();
            Ok(PieceEnvelope::Finite { value, maximizer })
        }
        LpStatus::Unbounded => {
            let ray = sol.primal_ray.unwrap_or_default();
            let u: Vec<f64> = ray[..d].to_vec();
            let len = norm.eval(u.iter().copied());
            if len <= 1e-12 {
                return Err(Error::Numerical("envelope ray has no support component".into()));
            }
            Ok(PieceEnvelope::Unbounded { direction: u.into_iter().map(|v| v / len).collect() })
        }
        LpStatus::Infeasible => Err(Error::InvalidInput("support set is empty".into())),
    }
}

/// Offsets of each `gamma_k` block in a flattened dual point.
pub fn dual_offsets(amb: &AmbiguitySpec) -> Vec<usize> {
    let mut off = Vec::with_capacity(amb.num_sources());
    let mut next = amb.num_sources();
    for s in &amb.sources {
        off.push(next);
        next += s.center.len();
    }
    off
}

pub fn dual_dimension(amb: &AmbiguitySpec) -> usize {
    amb.num_sources() + amb.shape().iter().sum::<usize>()
}

/// Objective vector `(epsilon, p)` of the dual problem.
pub fn dual_objective_vector(amb: &AmbiguitySpec) -> Vec<f64> {
    let mut f = amb.radii();
    for s in &amb.sources {
        f.extend_from_slice(s.center.probs());
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Inside,
    Cut(Halfspace),
}

pub const SEPARATION_TOL: f64 = 1e-9;

/// Decides whether a flattened dual point satisfies every robust
/// constraint; otherwise returns a halfspace containing the dual feasible
/// set but not the point.
pub fn separation_oracle(
    point: &[f64],
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
) -> Result<Separation> {
    separation_oracle_with_tol(point, amb, loss, support, SEPARATION_TOL)
}

pub fn separation_oracle_with_tol(
    point: &[f64],
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
    tol: f64,
) -> Result<Separation> {
    let kk = amb.num_sources();
    let dim = dual_dimension(amb);
    if point.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: point.len() });
    }
    let lambda = &point[..kk];
    if let Some(k) = lambda.iter().position(|&l| l < 0.0) {
        let mut normal = vec![0.0; dim];
        normal[k] = -1.0;
        return Ok(Separation::Cut(Halfspace { normal, rhs: 0.0 }));
    }
    let offsets = dual_offsets(amb);
    for alpha in MultiIndices::new(&amb.shape()) {
        let anchors = amb.anchors(&alpha);
        let env = moreau_envelope(lambda, &anchors, loss, support, &amb.cost)?;
        if let Some(h) = env.halfspace {
            let mut normal = vec![0.0; dim];
            normal[..kk].copy_from_slice(&h.normal);
            return Ok(Separation::Cut(Halfspace { normal, rhs: h.rhs }));
        }
        let gamma_sum: f64 = alpha.iter().enumerate().map(|(k, &j)| point[offsets[k] + j]).sum();
        if env.value > gamma_sum + tol * (1.0 + env.value.abs()) {
            let xi = env.maximizer.expect("finite envelope has a maximizer");
            let mut normal = vec![0.0; dim];
            for k in 0..kk {
                normal[k] = -amb.cost.eval(&xi, anchors[k]);
                normal[offsets[k] + alpha[k]] -= 1.0;
            }
            return Ok(Separation::Cut(Halfspace { normal, rhs: -loss.eval(&xi) }));
        }
    }
    Ok(Separation::Inside)
}

#[derive(Debug, Clone)]
pub struct EllipsoidState {
    pub center: Vec<f64>,
    /// Row-major shape matrix `P` of `{x : (x - c)^T P^-1 (x - c) <= 1}`.
    pub shape: Vec<f64>,
    pub iterations: usize,
    pub best_value: f64,
    pub best_point: Option<Vec<f64>>,
    pub log_det: f64,
}

#[derive(Debug, Clone)]
pub struct EllipsoidOutcome {
    pub value: f64,
    pub point: Vec<f64>,
    pub lower_bound: f64,
    pub iterations: usize,
    /// `log det P` after every update.
    pub log_det_history: Vec<f64>,
}

/// Iteration budget used by [`ellipsoid_solve`].
pub fn ellipsoid_budget(n: usize, radius: f64, objective_norm: f64, delta: f64) -> usize {
    let ratio = (radius * objective_norm.max(1.0) / delta).max(std::f64::consts::E);
    50 * n * n * ratio.ln().ceil() as usize + 1000
}

/// Radius heuristic: ten times the scale of a known dual solution.
pub fn default_radius(dual_point: &[f64]) -> f64 {
    10.0 * (1.0 + dual_point.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Minimizes the dual objective over the dual feasible set intersected
/// with the ball of radius `radius` around the origin, to accuracy `delta`.
pub fn ellipsoid_solve(
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
    radius: f64,
    delta: f64,
) -> Result<EllipsoidOutcome> {
    if !(radius > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidInput("radius and accuracy must be positive".into()));
    }
    let n = dual_dimension(amb);
    let f = dual_objective_vector(amb);
    let fnorm = dot(&f, &f).sqrt();
    let budget = ellipsoid_budget(n, radius, fnorm, delta);
    let mut state = EllipsoidState {
        center: vec![0.0; n],
        shape: (0..n * n).map(|i| if i % (n + 1) == 0 { radius * radius } else { 0.0 }).collect(),
        iterations: 0,
        best_value: f64::INFINITY,
        best_point: None,
        log_det: 2.0 * n as f64 * radius.ln(),
    };
    let mut history = Vec::new();
    let nf = n as f64;
    while state.iterations < budget {
        let normal = match separation_oracle(&state.center, amb, loss, support)? {
            Separation::Inside => {
                let v = dot(&f, &state.center);
                if v < state.best_value {
                    state.best_value = v;
                    state.best_point = Some(state.center.clone());
                }
                f.clone()
            }
            Separation::Cut(h) => h.normal,
        };
        let pf = mat_vec(&state.shape, &f, n);
        let lower = dot(&f, &state.center) - dot(&f, &pf).max(0.0).sqrt();
        if state.best_value - lower <= delta {
            let point = state.best_point.clone().expect("finite best value has a point");
            if dot(&point, &point).sqrt() > 0.5 * radius {
                return Err(Error::UnboundedObjective(radius));
            }
            return Ok(EllipsoidOutcome {
                value: state.best_value,
                point,
                lower_bound: lower,
                iterations: state.iterations,
                log_det_history: history,
            });
        }
        let ph = mat_vec(&state.shape, &normal, n);
        let hph = dot(&normal, &ph);
        if !(hph > 0.0) {
            return Err(Error::Numerical("degenerate ellipsoid cut".into()));
        }
        let g: Vec<f64> = ph.iter().map(|v| v / hph.sqrt()).collect();
        for (c, gi) in state.center.iter_mut().zip(&g) {
            *c -= gi / (nf + 1.0);
        }
        let scale = nf * nf / (nf * nf - 1.0);
        let shrink = 2.0 / (nf + 1.0);
        for i in 0..n {
            for j in 0..n {
                state.shape[i * n + j] = scale * (state.shape[i * n + j] - shrink * g[i] * g[j]);
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (state.shape[i * n + j] + state.shape[j * n + i]);
                state.shape[i * n + j] = avg;
                state.shape[j * n + i] = avg;
            }
        }
        if !cholesky_ok(&state.shape, n) {
            return Err(Error::Numerical("ellipsoid shape matrix lost positive definiteness".into()));
        }
        state.log_det += nf * scale.ln() + (1.0 - shrink).ln();
        history.push(state.log_det);
        state.iterations += 1;
    }
    Err(Error::IterationBudgetExceeded(budget))
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// Attempts a Cholesky factorization; true when the matrix is positive
/// definite.
pub fn cholesky_ok(m: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}
