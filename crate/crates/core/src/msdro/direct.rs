//! The dual LP written out block by block.
//!
//! Column layout: `theta` (free) | `lambda` (>= 0) | `gamma` (free, grouped
//! by source) | one block per `(alpha, l)` holding `z` (>= 0, one per
//! support row), `w` (free, `K x d`, source-major) and, for the linf cost,
//! absolute-value helpers `v` (>= 0, `K x d`).
//!
//! Row layout: the rows of the decision set first, then one block per
//! `(alpha, l)` in lexicographic `alpha` order with `l` fastest. Each block
//! is `[robust row, d balance rows, cap rows]` where the cap rows are
//! `2 d` per source for l1 and `2 d + 1` per source for linf.

use msdro_lp::{LpBuilder, LpModel, RowSense, Sense};

use crate::distribution::Norm;
use crate::error::{Error, Result};
use crate::model::{AmbiguitySpec, DecisionLoss, Polyhedron};
use crate::multi_index::{product_size, MultiIndices};

#[derive(Debug, Clone)]
pub struct DualLpLayout {
    pub num_decisions: usize,
    pub num_sources: usize,
    pub dim: usize,
    pub num_pieces: usize,
    pub support_rows: usize,
    pub norm: Norm,
    pub theta_col: usize,
    pub lambda_col: usize,
    /// First `gamma` column of each source.
    pub gamma_col: Vec<usize>,
    pub first_block_col: usize,
    pub cols_per_block: usize,
    pub decision_rows: usize,
    pub rows_per_block: usize,
    pub alphas: Vec<Vec<usize>>,
}

impl DualLpLayout {
    pub fn new(
        amb: &AmbiguitySpec,
        num_decisions: usize,
        num_pieces: usize,
        support: &Polyhedron,
        decision_rows: usize,
    ) -> Result<Self> {
        let norm = amb.cost.lp_norm()?;
        let kk = amb.num_sources();
        let d = amb.dim();
        let shape = amb.shape();
        let mut gamma_col = Vec::with_capacity(kk);
        let mut next = num_decisions + kk;
        for &n in &shape {
            gamma_col.push(next);
            next += n;
        }
        let m = support.num_rows();
        let aux = if norm == Norm::Linf { kk * d } else { 0 };
        let caps = match norm {
            Norm::Linf => kk * (2 * d + 1),
            _ => kk * 2 * d,
        };
        Ok(Self {
            num_decisions,
            num_sources: kk,
            dim: d,
            num_pieces,
            support_rows: m,
            norm,
            theta_col: 0,
            lambda_col: num_decisions,
            gamma_col,
            first_block_col: next,
            cols_per_block: m + kk * d + aux,
            decision_rows,
            rows_per_block: 1 + d + caps,
            alphas: MultiIndices::new(&shape).collect(),
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.alphas.len() * self.num_pieces
    }

    pub fn num_rows(&self) -> usize {
        self.decision_rows + self.num_blocks() * self.rows_per_block
    }

    pub fn num_cols(&self) -> usize {
        self.first_block_col + self.num_blocks() * self.cols_per_block
    }

    pub fn block_index(&self, alpha_index: usize, piece: usize) -> usize {
        alpha_index * self.num_pieces + piece
    }

    pub fn robust_row(&self, block: usize) -> usize {
        self.decision_rows + block * self.rows_per_block
    }

    pub fn balance_row(&self, block: usize, i: usize) -> usize {
        self.robust_row(block) + 1 + i
    }

    fn z_col(&self, block: usize, r: usize) -> usize {
        self.first_block_col + block * self.cols_per_block + r
    }

    fn w_col(&self, block: usize, k: usize, i: usize) -> usize {
        self.first_block_col + block * self.cols_per_block + self.support_rows + k * self.dim + i
    }

    fn v_col(&self, block: usize, k: usize, i: usize) -> usize {
        self.first_block_col + block * self.cols_per_block + self.support_rows + self.num_sources * self.dim + k * self.dim + i
    }
}

/// Rough row count of the dual LP, used to choose a solution method before
/// building anything.
pub fn estimated_rows(amb: &AmbiguitySpec, num_pieces: usize, decision_rows: usize) -> usize {
    let d = amb.dim();
    let kk = amb.num_sources();
    let per_block = 1 + d + kk * (2 * d + 1);
    product_size(&amb.shape()).saturating_mul(num_pieces).saturating_mul(per_block).saturating_add(decision_rows)
}

pub fn build(
    amb: &AmbiguitySpec,
    loss: &DecisionLoss,
    decisions: &Polyhedron,
    support: &Polyhedron,
    max_rows: usize,
) -> Result<(LpModel, DualLpLayout)> {
    let d = amb.dim();
    loss.validate(d)?;
    support.validate(Some(d))?;
    let n = loss.num_decisions;
    if n > 0 {
        decisions.validate(Some(n))?;
    }
    let decision_rows = if n > 0 { decisions.num_rows() } else { 0 };
    let est = estimated_rows(amb, loss.pieces.len(), decision_rows);
    if est > max_rows {
        return Err(Error::SizeExceeded { size: est, cap: max_rows });
    }
    let layout = DualLpLayout::new(amb, n, loss.pieces.len(), support, decision_rows)?;
    let kk = layout.num_sources;

    let mut b = LpBuilder::new(Sense::Minimize);
    for _ in 0..n {
        b.add_free_var(0.0);
    }
    for s in &amb.sources {
        b.add_nonneg_var(s.radius);
    }
    for s in &amb.sources {
        for &p in s.center.probs() {
            b.add_free_var(p);
        }
    }
    for (row, &g) in decisions.c.iter().zip(&decisions.g).take(decision_rows) {
        let entries: Vec<(usize, f64)> = row.iter().enumerate().map(|(j, &v)| (layout.theta_col + j, v)).collect();
        b.add_constraint(&entries, RowSense::Le, g);
    }

    for (ai, alpha) in layout.alphas.iter().enumerate() {
        for (l, piece) in loss.pieces.iter().enumerate() {
            let block = layout.block_index(ai, l);
            for _ in 0..support.num_rows() {
                b.add_nonneg_var(0.0);
            }
            for _ in 0..kk * d {
                b.add_free_var(0.0);
            }
            if layout.norm == Norm::Linf {
                for _ in 0..kk * d {
                    b.add_nonneg_var(0.0);
                }
            }

            let robust = b.add_row(RowSense::Le, -piece.b0);
            for (j, &beta) in piece.beta.iter().enumerate() {
                b.set(robust, layout.theta_col + j, beta);
            }
            for k in 0..kk {
                let anchor = amb.sources[k].center.atom(alpha[k]);
                for i in 0..d {
                    b.set(robust, layout.w_col(block, k, i), anchor[i]);
                }
                b.set(robust, layout.gamma_col[k] + alpha[k], -1.0);
            }
            for (r, &g) in support.g.iter().enumerate() {
                b.set(robust, layout.z_col(block, r), g);
            }

            for i in 0..d {
                let row = b.add_row(RowSense::Eq, piece.a0[i]);
                for k in 0..kk {
                    b.set(row, layout.w_col(block, k, i), 1.0);
                }
                for (r, crow) in support.c.iter().enumerate() {
                    b.set(row, layout.z_col(block, r), crow[i]);
                }
                for (j, &coef) in piece.a_theta[i].iter().enumerate() {
                    b.set(row, layout.theta_col + j, -coef);
                }
            }

            for k in 0..kk {
                let lam = layout.lambda_col + k;
                match layout.norm {
                    Norm::Linf => {
                        for i in 0..d {
                            let (w, v) = (layout.w_col(block, k, i), layout.v_col(block, k, i));
                            b.add_constraint(&[(w, 1.0), (v, -1.0)], RowSense::Le, 0.0);
                            b.add_constraint(&[(w, -1.0), (v, -1.0)], RowSense::Le, 0.0);
                        }
                        let mut entries: Vec<(usize, f64)> = (0..d).map(|i| (layout.v_col(block, k, i), 1.0)).collect();
                        entries.push((lam, -1.0));
                        b.add_constraint(&entries, RowSense::Le, 0.0);
                    }
                    _ => {
                        for i in 0..d {
                            let w = layout.w_col(block, k, i);
                            b.add_constraint(&[(w, 1.0), (lam, -1.0)], RowSense::Le, 0.0);
                            b.add_constraint(&[(w, -1.0), (lam, -1.0)], RowSense::Le, 0.0);
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(b.num_rows(), layout.num_rows());
    debug_assert_eq!(b.num_vars(), layout.num_cols());
    Ok((b.build()?, layout))
}
