use msdro_lp::LpError;
use thiserror::Error;

use crate::msdro::InfeasibilityCertificate;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("all weights are zero")]
    AllWeightsZero,
    #[error("unsupported ground cost: {0}")]
    UnsupportedCost(String),
    #[error("problem size {size} exceeds the cap of {cap}")]
    SizeExceeded { size: usize, cap: usize },
    #[error("the intersection of the ambiguity sets is empty (certificate slope {:.3e})", .0.slope)]
    IntersectionEmpty(Box<InfeasibilityCertificate>),
    #[error("worst-case recovery is degenerate: recovered mass {mass}")]
    RecoveryDegenerate { mass: f64 },
    #[error("negative transport multiplier at index {0}")]
    NegativeLambda(usize),
    #[error("ellipsoid method exhausted its budget of {0} iterations")]
    IterationBudgetExceeded(usize),
    #[error("objective appears unbounded below within radius {0}")]
    UnboundedObjective(f64),
    #[error("invalid concentration parameters: {0}")]
    InvalidParams(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("target significance {0} cannot be reached")]
    Unreachable(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub type Result<T> = std::result::Result<T, Error>;
