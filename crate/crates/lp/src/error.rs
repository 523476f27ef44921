use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model size {rows} rows x {cols} columns exceeds the configured limit ({max_rows} x {max_cols})")]
    SizeExceeded { rows: usize, cols: usize, max_rows: usize, max_cols: usize },
    #[error("enumeration would visit {subsets} subsets, more than the cap of {cap}")]
    EnumerationTooLarge { subsets: u128, cap: u128 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

pub type Result<T> = std::result::Result<T, LpError>;
