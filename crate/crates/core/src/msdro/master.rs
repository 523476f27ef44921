//! Column generation on the primal side of the dual LP.
//!
//! The restricted master is a maximization over masses placed on candidate
//! points `(alpha, l, xi)` and on recession directions `(l, u)`:
//!
//! ```text
//! max  sum_c mu_c (<a0_l, xi_c> + b0_l) + sum_r mu_r <a0_l, u_r> - sum nu g_theta
//! s.t. sum_c mu_c (A_l^T xi_c + beta_l) + sum_r mu_r A_l^T u_r + C_theta^T nu = 0
//!      sum_c mu_c c(xi_c, xi_hat_{k, alpha_k}) + sum_r mu_r ||u_r||      <= eps_k
//!      sum_{c : alpha_k = j} mu_c                                        = p_{k j}
//! ```
//!
//! Its row duals are the decision (negated), `lambda` and `gamma`. Penalty
//! columns with weight `M` keep the master feasible and bounded; they
//! correspond to box constraints of size `M` on the dual variables, and `M`
//! grows whenever a penalty stays active at convergence. Pricing calls the
//! Moreau envelope for every `(alpha, l)`.

use std::collections::HashSet;

use msdro_lp::{solve_lp_with, LpBuilder, LpStatus, RowSense, Sense, SolverOptions};

use crate::distribution::Norm;
use crate::error::{Error, Result};
use crate::model::{dot, AmbiguitySpec, DecisionLoss, Polyhedron};
use crate::multi_index::MultiIndices;
use crate::oracle::{piece_envelope, PieceEnvelope};

const INITIAL_PENALTY: f64 = 1e4;
const MAX_PENALTY: f64 = 1e12;
const MAX_ROUNDS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Atom { alpha: Vec<usize>, piece: usize, xi: Vec<f64> },
    Ray { piece: usize, u: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub value: f64,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    /// Mass on each column, aligned with `Master::columns`.
    pub weights: Vec<f64>,
    pub penalty_active: bool,
}

pub enum MasterOutcome {
    Converged(MasterSolution),
    /// The penalty reached its cap while still active: the dual problem is
    /// unbounded below (or numerically indistinguishable from it).
    Unbounded,
}

pub struct Master<'a> {
    amb: &'a AmbiguitySpec,
    loss: &'a DecisionLoss,
    decisions: &'a Polyhedron,
    support: &'a Polyhedron,
    norm: Norm,
    pub columns: Vec<Column>,
    keys: HashSet<Vec<u64>>,
    pub rounds: usize,
    opts: SolverOptions,
}

fn key_of(col: &Column) -> Vec<u64> {
    match col {
        Column::Atom { alpha, piece, xi } => {
            let mut k = vec![0, *piece as u64];
            k.extend(alpha.iter().map(|&a| a as u64));
            k.extend(xi.iter().map(|v| (v + 0.0).to_bits()));
            k
        }
        Column::Ray { piece, u } => {
            let mut k = vec![1, *piece as u64];
            k.extend(u.iter().map(|v| (v + 0.0).to_bits()));
            k
        }
    }
}

impl<'a> Master<'a> {
    pub fn new(
        amb: &'a AmbiguitySpec,
        loss: &'a DecisionLoss,
        decisions: &'a Polyhedron,
        support: &'a Polyhedron,
    ) -> Result<Self> {
        let norm = amb.cost.lp_norm()?;
        let d = amb.dim();
        loss.validate(d)?;
        support.validate(Some(d))?;
        if loss.num_decisions > 0 {
            decisions.validate(Some(loss.num_decisions))?;
        }
        Ok(Self {
            amb,
            loss,
            decisions,
            support,
            norm,
            columns: Vec::new(),
            keys: HashSet::new(),
            rounds: 0,
            opts: SolverOptions { max_cols: 200_000, ..SolverOptions::default() },
        })
    }

    pub fn add_column(&mut self, col: Column) -> bool {
        if self.keys.insert(key_of(&col)) {
            self.columns.push(col);
            true
        } else {
            false
        }
    }

    /// Seeds atoms at the reference points for a north-west-corner set of
    /// multi-indices covering every atom of every source.
    pub fn seed_corner(&mut self) {
        let kk = self.amb.num_sources();
        let probs: Vec<&[f64]> = self.amb.sources.iter().map(|s| s.center.probs()).collect();
        let mut idx = vec![0usize; kk];
        let mut rest: Vec<f64> = probs.iter().map(|p| p[0]).collect();
        let mut alphas = Vec::new();
        loop {
            alphas.push(idx.clone());
            let step = rest.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut done = false;
            for k in 0..kk {
                rest[k] -= step;
                if rest[k] <= 1e-14 {
                    idx[k] += 1;
                    if idx[k] >= probs[k].len() {
                        done = true;
                    } else {
                        rest[k] = probs[k][idx[k]];
                    }
                }
            }
            if done {
                break;
            }
        }
        for alpha in alphas {
            for l in 0..self.loss.pieces.len() {
                for k in 0..kk {
                    let xi = self.amb.sources[k].center.atom(alpha[k]).to_vec();
                    if self.support.contains(&xi, 1e-12) {
                        self.add_column(Column::Atom { alpha: alpha.clone(), piece: l, xi });
                    }
                }
            }
        }
    }

    /// Solves the restricted master. `penalty = None` solves it without
    /// penalty columns and returns `Ok(None)` when infeasible.
    pub fn solve_restricted(&self, penalty: Option<f64>) -> Result<Option<MasterSolution>> {
        let amb = self.amb;
        let n = self.loss.num_decisions;
        let kk = amb.num_sources();
        let shape = amb.shape();
        let mut marg_off = Vec::with_capacity(kk);
        let mut b = LpBuilder::new(Sense::Maximize);
        for _ in 0..n {
            b.add_row(RowSense::Eq, 0.0);
        }
        let budget_row = n;
        for s in &amb.sources {
            b.add_row(RowSense::Le, s.radius);
        }
        let mut next = n + kk;
        for (k, s) in amb.sources.iter().enumerate() {
            marg_off.push(next);
            for &p in s.center.probs() {
                b.add_row(RowSense::Eq, p);
            }
            next += shape[k];
        }

        for col in &self.columns {
            match col {
                Column::Atom { alpha, piece, xi } => {
                    let p = &self.loss.pieces[*piece];
                    let j = b.add_nonneg_var(dot(&p.a0, xi) + p.b0);
                    for (r, g) in p.theta_gradient(xi).into_iter().enumerate() {
                        b.set(r, j, g);
                    }
                    for k in 0..kk {
                        let anchor = amb.sources[k].center.atom(alpha[k]);
                        b.set(budget_row + k, j, self.norm.distance(xi, anchor));
                        b.set(marg_off[k] + alpha[k], j, 1.0);
                    }
                }
                Column::Ray { piece, u } => {
                    let p = &self.loss.pieces[*piece];
                    let j = b.add_nonneg_var(dot(&p.a0, u));
                    for (r, g) in p.theta_direction(u).into_iter().enumerate() {
                        b.set(r, j, g);
                    }
                    let len = self.norm.eval(u.iter().copied());
                    for k in 0..kk {
                        b.set(budget_row + k, j, len);
                    }
                }
            }
        }
        if n > 0 {
            for (row, &g) in self.decisions.c.iter().zip(&self.decisions.g) {
                let j = b.add_nonneg_var(-g);
                for (r, &v) in row.iter().enumerate() {
                    b.set(r, j, v);
                }
            }
        }
        let first_penalty = b.num_vars();
        if let Some(m) = penalty {
            for r in 0..n {
                b.add_constraint_column(r, 1.0, -m);
                b.add_constraint_column(r, -1.0, -m);
            }
            for k in 0..kk {
                b.add_constraint_column(budget_row + k, -1.0, -m);
            }
            for r in n + kk..next {
                b.add_constraint_column(r, 1.0, -m);
                b.add_constraint_column(r, -1.0, -m);
            }
        }
        let model = b.build()?;
        let sol = solve_lp_with(&model, &self.opts)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(None),
            LpStatus::Unbounded => {
                return Ok(Some(MasterSolution {
                    value: f64::INFINITY,
                    theta: vec![0.0; n],
                    lambda: vec![0.0; kk],
                    gamma: Vec::new(),
                    weights: Vec::new(),
                    penalty_active: true,
                }))
            }
        }
        let theta = sol.duals[..n].iter().map(|v| -v).collect();
        let lambda = sol.duals[budget_row..budget_row + kk].iter().map(|v| v.max(0.0)).collect();
        let gamma = (0..kk).map(|k| sol.duals[marg_off[k]..marg_off[k] + shape[k]].to_vec()).collect();
        let weights = sol.x[..self.columns.len()].to_vec();
        let penalty_active = sol.x[first_penalty..].iter().any(|&v| v > 1e-9);
        Ok(Some(MasterSolution { value: sol.objective, theta, lambda, gamma, weights, penalty_active }))
    }

    /// Adds the most violated column for every multi-index; returns how
    /// many new columns were added.
    fn price(&mut self, sol: &MasterSolution, tol: f64) -> Result<usize> {
        let pieces: Vec<(Vec<f64>, f64)> =
            self.loss.pieces.iter().map(|p| (p.slope(&sol.theta), p.intercept(&sol.theta))).collect();
        let mut added = 0;
        let mut new_cols = Vec::new();
        for alpha in MultiIndices::new(&self.amb.shape()) {
            let anchors = self.amb.anchors(&alpha);
            let gamma_sum: f64 = alpha.iter().enumerate().map(|(k, &j)| sol.gamma[k][j]).sum();
            let mut best: Option<(f64, Column)> = None;
            for (l, (a, b)) in pieces.iter().enumerate() {
                let mut env = piece_envelope(&sol.lambda, &anchors, a, *b, self.support, self.norm)?;
                if let PieceEnvelope::Unbounded { direction } = &env {
                    let slope = dot(a, direction) - sol.lambda.iter().sum::<f64>() * self.norm.eval(direction.iter().copied());
                    if slope > tol {
                        best = Some((f64::INFINITY, Column::Ray { piece: l, u: direction.clone() }));
                        break;
                    }
                    // only unbounded within tolerance: price the bounded
                    // problem with slightly larger multipliers instead
                    let bumped: Vec<f64> = sol.lambda.iter().map(|v| v + tol).collect();
                    env = piece_envelope(&bumped, &anchors, a, *b, self.support, self.norm)?;
                    if let PieceEnvelope::Finite { maximizer, .. } = &env {
                        let value = dot(a, maximizer) + b
                            - sol.lambda.iter().zip(&anchors).map(|(lam, p)| lam * self.norm.distance(maximizer, p)).sum::<f64>();
                        env = PieceEnvelope::Finite { value, maximizer: maximizer.clone() };
                    }
                }
                match env {
                    PieceEnvelope::Unbounded { direction } => {
                        best = Some((f64::INFINITY, Column::Ray { piece: l, u: direction }));
                        break;
                    }
                    PieceEnvelope::Finite { value, maximizer } => {
                        let viol = value - gamma_sum;
                        if viol > tol && best.as_ref().is_none_or(|(v, _)| viol > *v) {
                            best = Some((viol, Column::Atom { alpha: alpha.clone(), piece: l, xi: maximizer }));
                        }
                    }
                }
            }
            if let Some((_, col)) = best {
                new_cols.push(col);
            }
        }
        for col in new_cols {
            if self.add_column(col) {
                added += 1;
            }
        }
        Ok(added)
    }

    /// Runs column generation to convergence.
    pub fn run(&mut self) -> Result<MasterOutcome> {
        self.run_with_penalty(INITIAL_PENALTY, true)
    }

    /// Column generation with a fixed or growing penalty.
    pub fn run_with_penalty(&mut self, initial: f64, grow: bool) -> Result<MasterOutcome> {
        if self.columns.is_empty() {
            self.seed_corner();
        }
        let mut penalty = initial;
        for round in 0..MAX_ROUNDS {
            self.rounds = round + 1;
            let sol = self.solve_restricted(Some(penalty))?.expect("penalized master is feasible");
            if !sol.value.is_finite() {
                if !grow || penalty >= MAX_PENALTY {
                    return Ok(MasterOutcome::Unbounded);
                }
                penalty *= 100.0;
                continue;
            }
            let tol = 1e-9 * (1.0 + sol.value.abs());
            let added = self.price(&sol, tol)?;
            if added == 0 {
                if sol.penalty_active && grow {
                    if penalty >= MAX_PENALTY {
                        return Ok(MasterOutcome::Unbounded);
                    }
                    penalty *= 100.0;
                    continue;
                }
                return Ok(MasterOutcome::Converged(sol));
            }
        }
        Err(Error::Numerical(format!("column generation did not converge in {MAX_ROUNDS} rounds")))
    }
}

trait PenaltyColumn {
    fn add_constraint_column(&mut self, row: usize, coef: f64, cost: f64) -> usize;
}

impl PenaltyColumn for LpBuilder {
    fn add_constraint_column(&mut self, row: usize, coef: f64, cost: f64) -> usize {
        let j = self.add_nonneg_var(cost);
        self.set(row, j, coef);
        j
    }
}
