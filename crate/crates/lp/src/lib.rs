//! Linear programming kernel: a deterministic bounded-variable revised
//! simplex with dual values and certificates, plus subset enumeration for
//! small binary programs.

mod enumerate;
mod error;
mod model;
mod simplex;

pub use enumerate::{
    count_supports, for_each_support, solve_binary_by_enumeration, solve_binary_by_enumeration_with, BinarySolution,
    DEFAULT_SUBSET_CAP, MAX_BINARY_VARS,
};
pub use error::{LpError, Result};
pub use model::{LpBuilder, LpModel, RowSense, Sense};
pub use simplex::{solve_lp, solve_lp_with, LpSolution, LpStatus, SolverOptions};
