//! Numerical toolkit for minimal graphs of higher codimension.
//!
//! A map f: D ⊂ ℝᵐ → ℝⁿ is studied through the singular values
//! λ₁ ≥ … ≥ λₘ of its differential. The crate provides:
//!
//! - [`svkit`]: singular values and frames of a differential, the area
//!   density, the region of singular-value space on which the area
//!   functional is well behaved, and the convex constraint sets used for
//!   confinement.
//! - [`majorization`]: partial-sum domination of singular-value vectors
//!   and the weak-majorization hull test.
//! - [`graphgeom`]: simplicial grid maps over box domains, the pullback
//!   metric, the discrete area functional and its gradient, and CSV
//!   round-tripping.
//! - [`variation`]: boundary-fixing variation fields, the frame pairing
//!   matrix, and the split of the second variation of area into its
//!   diagonal, off-diagonal and normal parts.
//! - [`homotopy`]: singular-value traces along straight-line homotopies,
//!   the chord comparison and confinement checks, and the
//!   gradient-vanishing diagnostic for coincident solutions.
//! - [`solver`]: the Dirichlet solver minimizing discrete area and the
//!   multi-start uniqueness experiment.

pub mod error;
pub mod graphgeom;
pub mod homotopy;
pub mod majorization;
pub mod mat;
pub mod solver;
pub mod svkit;
pub mod variation;

pub use error::{Error, Result};
pub use graphgeom::{
    area, area_and_gradient, area_gradient, singular_field, Domain, GridMap,
};
pub use homotopy::{
    check_prop1, check_prop2, classify_lambda, trace, ConfinementSet, HomotopyTrace,
};
pub use majorization::{asymp_l, l_majorizes, weak_hull_test, MajorizationReport};
pub use mat::Mat;
pub use solver::boundary::BoundaryData;
pub use solver::experiment::{uniqueness_experiment, ExperimentParams, ExperimentReport};
pub use solver::{solve_dirichlet, Init, SolveError, SolveOutput, SolverConfig};
pub use svkit::{
    area_density, classify_region, classify_region_h, h_value, psi, singular_values,
    ConstraintKind, ConstraintSet, RegionStatus, RegionVerdict, SingularValueVector,
};
pub use variation::{second_variation_terms, VariationField, VariationReport};
