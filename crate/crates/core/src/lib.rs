//! Multi-source distributionally robust optimization over intersections of
//! Wasserstein balls: optimal transport, Wasserstein barycenters, dual
//! reformulations, separation oracles and radius calibration.

pub mod barycenter;
pub mod calibration;
pub mod distribution;
pub mod error;
pub mod model;
pub mod msdro;
pub mod multi_index;
pub mod oracle;
pub mod transport;

pub use barycenter::{barycenter, barycenter_objective, BarycenterResult, MultiMarginPlan};
pub use calibration::{beta, eps_bayesian, eps_for_beta, ConcentrationParams, Prior, Scenario};
pub use distribution::{DiscreteDistribution, GroundCost, Norm};
pub use error::{Error, Result};
pub use model::{AffinePiece, AmbiguitySpec, DecisionLoss, DecisionPiece, PiecewiseAffineLoss, Polyhedron, Source};
pub use msdro::{
    solve_msdro, solve_msdro_with, worst_case_distribution, worst_case_distribution_with, worst_case_value,
    worst_case_value_with, DualSolution, InfeasibilityCertificate, Method, MsdroOptions, MsdroSolution, WorstCaseDistribution,
};
pub use oracle::{ellipsoid_solve, moreau_envelope, separation_oracle, Halfspace, Separation};
pub use transport::{ot_cost, wasserstein_distance, OtResult, TransportPlan};
