//! Worst-case expectations over intersections of transport balls with a
//! `p = 1` norm cost, piecewise affine losses and polyhedral supports.
//!
//! Two solution routes share one interface: the dual LP written out for
//! every `(alpha, l)` block ([`build_dual_lp`]), and column generation on
//! its primal side, which touches the exponentially many blocks only
//! through the Moreau envelope. [`Method::Auto`] picks the direct LP for
//! small instances.

mod direct;
mod master;

use msdro_lp::{solve_lp_with, LpModel, LpStatus, SolverOptions};

pub use direct::{estimated_rows, DualLpLayout};
pub use master::{Column, Master, MasterOutcome, MasterSolution};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::{dot, AmbiguitySpec, DecisionLoss, DecisionPiece, PiecewiseAffineLoss, Polyhedron};
use crate::multi_index::MultiIndices;
use crate::oracle::{dual_objective_vector, moreau_envelope, separation_oracle_with_tol, Separation};
use crate::transport::ot_cost;

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub lambda: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub value: f64,
}

impl DualSolution {
    /// `(lambda, gamma_1, ..., gamma_K)` as one vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.lambda.clone();
        for g in &self.gamma {
            v.extend_from_slice(g);
        }
        v
    }

    /// `sum_k eps_k lambda_k + sum_{k,j} p_kj gamma_kj`.
    pub fn objective(&self, amb: &AmbiguitySpec) -> f64 {
        dot(&dual_objective_vector(amb), &self.flatten())
    }
}

/// Recession direction of the dual feasible set with negative objective
/// slope, proving that the ambiguity sets do not intersect.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub lambda_inf: Vec<f64>,
    pub gamma_inf: Vec<Vec<f64>>,
    pub slope: f64,
}

impl InfeasibilityCertificate {
    fn from_flat(amb: &AmbiguitySpec, flat: &[f64]) -> Option<Self> {
        let scale = flat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale <= 0.0 {
            return None;
        }
        let flat: Vec<f64> = flat.iter().map(|v| v / scale).collect();
        let kk = amb.num_sources();
        let mut gamma_inf = Vec::with_capacity(kk);
        let mut off = kk;
        for n in amb.shape() {
            gamma_inf.push(flat[off..off + n].to_vec());
            off += n;
        }
        let slope = dot(&dual_objective_vector(amb), &flat);
        (slope < 0.0).then(|| Self { lambda_inf: flat[..kk].to_vec(), gamma_inf, slope })
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.lambda_inf.clone();
        for g in &self.gamma_inf {
            v.extend_from_slice(g);
        }
        v
    }

    /// Re-validates the certificate: starting from an explicitly built dual
    /// feasible point, moving `t` units along the direction keeps every
    /// robust constraint satisfied for `t` in `{1, 10}`, and the objective
    /// slope is negative.
    pub fn validate(&self, amb: &AmbiguitySpec, loss: &PiecewiseAffineLoss, support: &Polyhedron) -> Result<bool> {
        if !(self.slope < 0.0) || self.lambda_inf.iter().any(|&l| l < -1e-12) {
            return Ok(false);
        }
        let base = feasible_dual_point(amb, loss, support)?;
        let dir = self.flatten();
        for t in [1.0, 10.0] {
            let point: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            let point: Vec<f64> =
                point.iter().enumerate().map(|(i, &v)| if i < amb.num_sources() { v.max(0.0) } else { v }).collect();
            if separation_oracle_with_tol(&point, amb, loss, support, 1e-7)? != Separation::Inside {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A dual feasible point built from large multipliers and the resulting
/// envelope values, without solving any LP over all blocks.
pub fn feasible_dual_point(amb: &AmbiguitySpec, loss: &PiecewiseAffineLoss, support: &Polyhedron) -> Result<Vec<f64>> {
    let norm = amb.cost.lp_norm()?;
    let kk = amb.num_sources();
    let slope = loss.pieces.iter().map(|p| norm.dual().eval(p.a.iter().copied())).fold(0.0, f64::max);
    let lambda = vec![slope + 1.0; kk];
    let shape = amb.shape();
    let mut gamma: Vec<Vec<f64>> = shape.iter().map(|&n| vec![0.0; n]).collect();
    let mut first = vec![f64::NEG_INFINITY; shape[0]];
    for alpha in MultiIndices::new(&shape) {
        let env = moreau_envelope(&lambda, &amb.anchors(&alpha), loss, support, &amb.cost)?;
        if !env.is_finite() {
            return Err(Error::Numerical("envelope unbounded at large multipliers".into()));
        }
        first[alpha[0]] = first[alpha[0]].max(env.value);
    }
    gamma[0] = first;
    let mut flat = lambda;
    for g in gamma {
        flat.extend(g);
    }
    Ok(flat)
}

#[derive(Debug, Clone)]
pub struct WorstCaseDistribution {
    pub distribution: DiscreteDistribution,
    /// `1 + sum_k N_k`.
    pub support_bound: usize,
    /// Optimal transport cost from the distribution to each center.
    pub budgets_used: Vec<f64>,
    pub expected_loss: f64,
    /// Optimal value of the dual problem.
    pub dual_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Solve the dual LP with one block per `(alpha, l)`.
    Direct,
    /// Generate primal columns with the Moreau envelope as pricing oracle.
    ColumnGeneration,
    /// Direct when the dual LP has at most `direct_row_limit` rows.
    Auto,
}

#[derive(Debug, Clone)]
pub struct MsdroOptions {
    pub method: Method,
    pub direct_row_limit: usize,
    pub max_rows: usize,
}

impl Default for MsdroOptions {
    fn default() -> Self {
        Self { method: Method::Auto, direct_row_limit: 600, max_rows: 5_000 }
    }
}

impl MsdroOptions {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    fn use_direct(&self, amb: &AmbiguitySpec, pieces: usize, decision_rows: usize) -> bool {
        match self.method {
            Method::Direct => true,
            Method::ColumnGeneration => false,
            Method::Auto => estimated_rows(amb, pieces, decision_rows) <= self.direct_row_limit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MsdroSolution {
    pub theta: Vec<f64>,
    pub value: f64,
    pub dual: DualSolution,
}

/// Assembles the dual LP for a fixed loss. See [`DualLpLayout`] for the
/// row and column layout.
pub fn build_dual_lp(amb: &AmbiguitySpec, loss: &PiecewiseAffineLoss, support: &Polyhedron) -> Result<(LpModel, DualLpLayout)> {
    build_dual_lp_with(amb, &DecisionLoss::fixed(loss), &Polyhedron::free(), support, MsdroOptions::default().max_rows)
}

/// Assembles the joint LP over the decision and the dual variables.
pub fn build_dual_lp_with(
    amb: &AmbiguitySpec,
    loss: &DecisionLoss,
    decisions: &Polyhedron,
    support: &Polyhedron,
    max_rows: usize,
) -> Result<(LpModel, DualLpLayout)> {
    amb.validate()?;
    direct::build(amb, loss, decisions, support, max_rows)
}

fn lp_options(model: &LpModel) -> SolverOptions {
    SolverOptions::default().with_max_cols(model.num_vars().max(SolverOptions::default().max_cols))
}

fn dual_from_columns(amb: &AmbiguitySpec, layout: &DualLpLayout, x: &[f64], value: f64) -> DualSolution {
    let lambda = x[layout.lambda_col..layout.lambda_col + amb.num_sources()].iter().map(|v| v.max(0.0)).collect();
    let gamma = amb.shape().iter().enumerate().map(|(k, &n)| x[layout.gamma_col[k]..layout.gamma_col[k] + n].to_vec()).collect();
    DualSolution { lambda, gamma, value }
}

fn zero_loss(d: usize) -> DecisionLoss {
    DecisionLoss {
        num_decisions: 0,
        pieces: vec![DecisionPiece { a_theta: vec![Vec::new(); d], a0: vec![0.0; d], beta: Vec::new(), b0: 0.0 }],
    }
}

/// Searches for a certificate that the ambiguity sets do not intersect
/// within the support: a normalized recession direction of the dual
/// feasible set with negative slope. `Ok(None)` when none exists.
pub fn intersection_certificate(amb: &AmbiguitySpec, support: &Polyhedron) -> Result<Option<InfeasibilityCertificate>> {
    amb.validate()?;
    let loss = zero_loss(amb.dim());
    let free = Polyhedron::free();
    let mut master = Master::new(amb, &loss, &free, support)?;
    match master.run_with_penalty(1.0, false)? {
        MasterOutcome::Converged(sol) if sol.value < -1e-9 => {
            let dual = DualSolution { lambda: sol.lambda, gamma: sol.gamma, value: sol.value };
            Ok(InfeasibilityCertificate::from_flat(amb, &dual.flatten()))
        }
        _ => Ok(None),
    }
}

fn empty_intersection(amb: &AmbiguitySpec, support: &Polyhedron, ray: Option<Vec<f64>>) -> Error {
    let cert = ray.and_then(|r| InfeasibilityCertificate::from_flat(amb, &r));
    let cert = match cert {
        Some(c) => Some(c),
        None => match intersection_certificate(amb, support) {
            Ok(c) => c,
            Err(e) => return e,
        },
    };
    match cert {
        Some(c) => Error::IntersectionEmpty(Box::new(c)),
        None => Error::Numerical("dual problem unbounded but no emptiness certificate was found".into()),
    }
}

fn solve_general(
    amb: &AmbiguitySpec,
    loss: &DecisionLoss,
    decisions: &Polyhedron,
    support: &Polyhedron,
    opts: &MsdroOptions,
) -> Result<MsdroSolution> {
    amb.validate()?;
    amb.cost.lp_norm()?;
    let n = loss.num_decisions;
    let decision_rows = if n > 0 { decisions.num_rows() } else { 0 };
    if opts.use_direct(amb, loss.pieces.len(), decision_rows) {
        let (model, layout) = direct::build(amb, loss, decisions, support, opts.max_rows)?;
        let sol = solve_lp_with(&model, &lp_options(&model))?;
        match sol.status {
            LpStatus::Optimal => {
                let dual = dual_from_columns(amb, &layout, &sol.x, sol.objective);
                Ok(MsdroSolution { theta: sol.x[..n].to_vec(), value: sol.objective, dual })
            }
            LpStatus::Unbounded => {
                let ray = sol.primal_ray.filter(|r| n == 0 || r[..n].iter().all(|v| *v == 0.0));
                let flat = ray.map(|r| {
                    let mut f = r[layout.lambda_col..layout.lambda_col + amb.num_sources()].to_vec();
                    for (k, &nk) in amb.shape().iter().enumerate() {
                        f.extend_from_slice(&r[layout.gamma_col[k]..layout.gamma_col[k] + nk]);
                    }
                    f
                });
                Err(empty_intersection(amb, support, flat))
            }
            LpStatus::Infeasible => Err(Error::InvalidInput("the decision set is empty".into())),
        }
    } else {
        let mut master = Master::new(amb, loss, decisions, support)?;
        match master.run()? {
            MasterOutcome::Converged(sol) => {
                let dual = DualSolution { lambda: sol.lambda, gamma: sol.gamma, value: sol.value };
                Ok(MsdroSolution { theta: sol.theta, value: sol.value, dual })
            }
            MasterOutcome::Unbounded => Err(empty_intersection(amb, support, None)),
        }
    }
}

pub fn worst_case_value(amb: &AmbiguitySpec, loss: &PiecewiseAffineLoss, support: &Polyhedron) -> Result<DualSolution> {
    worst_case_value_with(amb, loss, support, &MsdroOptions::default())
}

pub fn worst_case_value_with(
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
    opts: &MsdroOptions,
) -> Result<DualSolution> {
    amb.validate()?;
    loss.validate(Some(amb.dim()))?;
    Ok(solve_general(amb, &DecisionLoss::fixed(loss), &Polyhedron::free(), support, opts)?.dual)
}

/// Minimizes the worst-case expected loss over the decision set.
pub fn solve_msdro(
    amb: &AmbiguitySpec,
    loss: &DecisionLoss,
    decisions: &Polyhedron,
    support: &Polyhedron,
) -> Result<MsdroSolution> {
    solve_msdro_with(amb, loss, decisions, support, &MsdroOptions::default())
}

pub fn solve_msdro_with(
    amb: &AmbiguitySpec,
    loss: &DecisionLoss,
    decisions: &Polyhedron,
    support: &Polyhedron,
    opts: &MsdroOptions,
) -> Result<MsdroSolution> {
    if loss.num_decisions == 0 {
        return Err(Error::InvalidInput("the loss has no decision variables".into()));
    }
    solve_general(amb, loss, decisions, support, opts)
}

pub fn worst_case_distribution(
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
) -> Result<WorstCaseDistribution> {
    worst_case_distribution_with(amb, loss, support, &MsdroOptions::default())
}

/// Recovers a sparse worst-case distribution. On the direct route the
/// masses and first moments come from the duals of the robust and balance
/// rows; either way the candidates are polished by column generation until
/// the Moreau oracle finds no improving point, and the final basic solution
/// has at most `1 + sum_k N_k` atoms.
pub fn worst_case_distribution_with(
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    support: &Polyhedron,
    opts: &MsdroOptions,
) -> Result<WorstCaseDistribution> {
    amb.validate()?;
    let norm = amb.cost.lp_norm()?;
    loss.validate(Some(amb.dim()))?;
    let fixed = DecisionLoss::fixed(loss);
    let free = Polyhedron::free();
    let mut master = Master::new(amb, &fixed, &free, support)?;
    let mut reference = None;
    if opts.use_direct(amb, loss.pieces.len(), 0) {
        let (model, layout) = direct::build(amb, &fixed, &free, support, opts.max_rows)?;
        let sol = solve_lp_with(&model, &lp_options(&model))?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => {
                let r = sol.primal_ray.unwrap_or_default();
                let mut f = r[layout.lambda_col..layout.lambda_col + amb.num_sources()].to_vec();
                for (k, &nk) in amb.shape().iter().enumerate() {
                    f.extend_from_slice(&r[layout.gamma_col[k]..layout.gamma_col[k] + nk]);
                }
                return Err(empty_intersection(amb, support, Some(f)));
            }
            LpStatus::Infeasible => return Err(Error::Numerical("dual LP reported infeasible".into())),
        }
        let d = amb.dim();
        let mut total_mass = 0.0;
        for (ai, alpha) in layout.alphas.iter().enumerate() {
            for l in 0..loss.pieces.len() {
                let block = layout.block_index(ai, l);
                let mu = -sol.duals[layout.robust_row(block)];
                let moment: Vec<f64> = (0..d).map(|i| sol.duals[layout.balance_row(block, i)]).collect();
                total_mass += mu.max(0.0);
                if mu > 1e-10 {
                    let xi: Vec<f64> = moment.iter().map(|m| m / mu).collect();
                    if support.contains(&xi, 1e-7) {
                        master.add_column(Column::Atom { alpha: alpha.clone(), piece: l, xi });
                    }
                } else {
                    let len = norm.eval(moment.iter().copied());
                    if len > 1e-9 {
                        let u: Vec<f64> = moment.iter().map(|m| m / len).collect();
                        let recedes = support.c.iter().all(|row| dot(row, &u) <= 1e-9);
                        if recedes {
                            master.add_column(Column::Ray { piece: l, u });
                        }
                    }
                }
            }
        }
        if total_mass < 1.0 - 1e-6 {
            return Err(Error::RecoveryDegenerate { mass: total_mass });
        }
        reference = Some(sol.objective);
    }
    master.seed_corner();
    let sol = match master.run()? {
        MasterOutcome::Converged(s) => s,
        MasterOutcome::Unbounded => return Err(empty_intersection(amb, support, None)),
    };
    let distribution = fold_columns(&master.columns, &sol.weights)?;
    let support_bound = 1 + amb.shape().iter().sum::<usize>();
    let expected_loss = distribution.expectation(|x| loss.eval(x));
    let budgets_used = amb
        .sources
        .iter()
        .map(|s| ot_cost(&distribution, &s.center, &amb.cost).map(|r| r.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(WorstCaseDistribution {
        distribution,
        support_bound,
        budgets_used,
        expected_loss,
        dual_value: reference.unwrap_or(sol.value),
    })
}

/// Turns master masses into a distribution. Mass on a recession direction
/// is realized by translating an atom of the same piece far enough along
/// it, which costs exactly the budget the direction used.
fn fold_columns(columns: &[Column], weights: &[f64]) -> Result<DiscreteDistribution> {
    let mut atoms: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut rays: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for (col, &w) in columns.iter().zip(weights) {
        if w <= 1e-12 {
            continue;
        }
        match col {
            Column::Atom { piece, xi, .. } => atoms.push((xi.clone(), w, *piece)),
            Column::Ray { piece, u } => rays.push((*piece, u.clone(), w)),
        }
    }
    if atoms.is_empty() {
        return Err(Error::RecoveryDegenerate { mass: 0.0 });
    }
    for (piece, u, w) in rays {
        let host =
            atoms.iter().enumerate().filter(|(_, a)| a.2 == piece).max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(i, _)| i);
        match host {
            Some(i) => {
                let step = w / atoms[i].1;
                for (x, ui) in atoms[i].0.iter_mut().zip(&u) {
                    *x += step * ui;
                }
            }
            None => {
                let i = (0..atoms.len()).max_by(|&a, &b| atoms[a].1.total_cmp(&atoms[b].1)).unwrap_or(0);
                let delta = 1e-6 * atoms[i].1;
                atoms[i].1 -= delta;
                let xi: Vec<f64> = atoms[i].0.iter().zip(&u).map(|(x, ui)| x + (w / delta) * ui).collect();
                atoms.push((xi, delta, piece));
            }
        }
    }
    DiscreteDistribution::from_weighted(atoms.into_iter().map(|(x, w, _)| (x, w)).collect(), 1e-10, 0.0)
}

/// Optimal value of the primal problem when every distribution is
/// restricted to the grid `lo + step * i` inside the box `[lo, hi]`.
/// `Ok(None)` when no grid-supported distribution lies in all balls.
pub fn grid_primal_value(
    amb: &AmbiguitySpec,
    loss: &PiecewiseAffineLoss,
    lo: &[f64],
    hi: &[f64],
    step: f64,
) -> Result<Option<f64>> {
    amb.validate()?;
    let d = amb.dim();
    loss.validate(Some(d))?;
    if lo.len() != d || hi.len() != d || !(step > 0.0) {
        return Err(Error::InvalidInput("grid needs one bound per coordinate and a positive step".into()));
    }
    let counts: Vec<usize> = (0..d).map(|i| ((hi[i] - lo[i]) / step).round() as usize + 1).collect();
    let points: Vec<Vec<f64>> = MultiIndices::new(&counts)
        .map(|ix| ix.iter().enumerate().map(|(i, &t)| (lo[i] + t as f64 * step).min(hi[i])).collect())
        .collect();
    let fixed = DecisionLoss::fixed(loss);
    let free = Polyhedron::free();
    let support = Polyhedron::bounds(lo, hi);
    let mut master = Master::new(amb, &fixed, &free, &support)?;
    for alpha in MultiIndices::new(&amb.shape()) {
        for xi in &points {
            let piece =
                (0..loss.pieces.len()).max_by(|&a, &b| loss.pieces[a].eval(xi).total_cmp(&loss.pieces[b].eval(xi))).unwrap_or(0);
            master.add_column(Column::Atom { alpha: alpha.clone(), piece, xi: xi.clone() });
        }
    }
    Ok(master.solve_restricted(None)?.map(|s| s.value))
}
