//! Optimal transport between vector-valued (multi-species) measures on
//! finite supports.
//!
//! A measure here has `n` species, each a nonnegative weight vector over a
//! shared finite support, with total mass one across all species. Transport
//! may move mass between species at a cost given by an `n x n` family of
//! cost matrices.
//!
//! - [`measures`]: supports, measures, cost families and their validation.
//! - [`solver`]: exact primal solver and a brute-force oracle for small sizes.
//! - [`dual`]: potentials, c-transforms, feasibility and slackness checks.
//! - [`metrics`]: `W_p` distances, mixed triangle inequality audits, gluing.
//! - [`io`]: JSON file formats.

pub mod dual;
pub mod error;
pub mod io;
pub mod measures;
pub mod metrics;
pub mod plan;
pub mod random;
pub mod solver;

pub use dual::{
    c_transform, cbar_transform, check_dual_feasible, check_optimality, dual_value,
    improve_potentials, improve_until_stall, PotentialPair,
};
pub use error::{Error, Result};
pub use measures::{
    validate_measure, CostTensor, GroundCost, MassCheck, MetricSpec, Point, SupportSet,
    VectorMeasure,
};
pub use metrics::{
    check_metric_axioms, check_mti, glue_plans, tuple_distance, wasserstein_p, Distance,
};
pub use plan::{CouplingTensor, PlanEntry};
pub use solver::{brute_force_oracle, solve_primal, SolveReport, SolveStatus};
