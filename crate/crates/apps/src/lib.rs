//! Applications of multi-source robust optimization: portfolio selection,
//! assortment planning, synthetic experiments and the barycenter bias demo.

pub mod assortment;
pub mod backtest;
pub mod bias;
pub mod portfolio;
pub mod report;
pub mod sensitivity;
pub mod synthetic;
