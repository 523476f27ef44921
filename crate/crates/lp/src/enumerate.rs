//! Exhaustive subset enumeration for small binary programs.

use crate::error::{LpError, Result};
use crate::model::{LpModel, Sense};
use crate::simplex::{solve_lp_with, LpSolution, LpStatus, SolverOptions};

pub const MAX_BINARY_VARS: usize = 25;
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;

/// Number of subsets of an `n`-set with at most `cap` elements.
pub fn count_supports(n: usize, cap: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for k in 0..=cap.min(n) {
        total += binom;
        binom = binom * (n - k) as u128 / (k + 1) as u128;
    }
    total
}

/// Calls `visit` on every subset of `0..n` with at most `cap` elements, in
/// order of increasing size and lexicographically within a size.
pub fn for_each_support(n: usize, cap: usize, subset_cap: u128, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let subsets = count_supports(n, cap);
    if subsets > subset_cap {
        return Err(LpError::EnumerationTooLarge { subsets, cap: subset_cap });
    }
    let cap = cap.min(n);
    for k in 0..=cap {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            visit(&idx)?;
            // advance to the next k-combination
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if idx[i] < n - k + i {
                    idx[i] += 1;
                    for t in i + 1..k {
                        idx[t] = idx[t - 1] + 1;
                    }
                    i = usize::MAX;
                    break;
                }
            }
            if i != usize::MAX {
                break;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BinarySolution {
    /// Best continuous solution with the binaries fixed.
    pub solution: LpSolution,
    /// Positions (into `binary_vars`) set to one.
    pub support: Vec<usize>,
    /// Full 0/1 assignment aligned with `binary_vars`.
    pub assignment: Vec<u8>,
    pub supports_evaluated: usize,
}

/// Fixes every binary variable to 0 or 1 for each support of size at most
/// `cardinality_cap`, solves the remaining LP and keeps the best one.
/// Returns `Ok(None)` when no support yields a feasible bounded LP.
pub fn solve_binary_by_enumeration(
    model: &LpModel,
    binary_vars: &[usize],
    cardinality_cap: usize,
) -> Result<Option<BinarySolution>> {
    solve_binary_by_enumeration_with(model, binary_vars, cardinality_cap, DEFAULT_SUBSET_CAP, &SolverOptions::default())
}

pub fn solve_binary_by_enumeration_with(
    model: &LpModel,
    binary_vars: &[usize],
    cardinality_cap: usize,
    subset_cap: u128,
    options: &SolverOptions,
) -> Result<Option<BinarySolution>> {
    let n = binary_vars.len();
    if n > MAX_BINARY_VARS {
        return Err(LpError::InvalidModel(format!("{n} binary variables, at most {MAX_BINARY_VARS} supported")));
    }
    if cardinality_cap > n {
        return Err(LpError::InvalidModel(format!("cardinality cap {cardinality_cap} exceeds {n} binaries")));
    }
    if let Some(&j) = binary_vars.iter().find(|&&j| j >= model.num_vars()) {
        return Err(LpError::InvalidModel(format!("binary variable {j} out of range")));
    }
    let maximize = model.sense() == Sense::Maximize;
    let mut best: Option<BinarySolution> = None;
    let mut evaluated = 0usize;
    for_each_support(n, cardinality_cap, subset_cap, |support| {
        evaluated += 1;
        let mut assignment = vec![0u8; n];
        for &s in support {
            assignment[s] = 1;
        }
        let changes: Vec<(usize, f64, f64)> =
            binary_vars.iter().zip(&assignment).map(|(&j, &a)| (j, a as f64, a as f64)).collect();
        let fixed = model.with_bounds(&changes)?;
        let sol = solve_lp_with(&fixed, options)?;
        if sol.status != LpStatus::Optimal {
            return Ok(());
        }
        let improves = match &best {
            None => true,
            Some(b) => {
                let tol = 1e-12 * (1.0 + b.solution.objective.abs());
                if maximize {
                    sol.objective > b.solution.objective + tol
                } else {
                    sol.objective < b.solution.objective - tol
                }
            }
        };
        if improves {
            best = Some(BinarySolution { solution: sol, support: support.to_vec(), assignment, supports_evaluated: 0 });
        }
        Ok(())
    })?;
    Ok(best.map(|mut b| {
        b.supports_evaluated = evaluated;
        b
    }))
}
