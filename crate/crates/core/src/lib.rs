//! Numerical solvers for weakly coupled Hamilton-Jacobi systems on the
//! circle: alternating component iteration under weak coupling, a
//! transform-and-semigroup pipeline for equations that are decreasing in
//! their own unknown, and the vanishing-discount computation of the critical
//! value alpha(c) of the two-component critical system.

pub mod config;
pub mod coupled;
pub mod critical;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod hamiltonian;
pub mod scalar;
pub mod semigroup;

pub use config::ConfigFile;
pub use coupled::{
    coupled_residual, detect_period, evolve_coupled, gauss_seidel, long_time_limit,
    verify_iteration_bounds, BoundsReport, CoupledTrajectory, IterationTrace, LongTimeResult,
    PeriodCheck,
};
pub use critical::{
    alpha_curve, default_eps_list, find_c0, solve_discounted, vanishing_discount, AlphaCurve,
    CriticalResult, DiscountedFamily, DiscountedSolution,
};
pub use error::{Error, Result};
pub use geometry::{GridField, SpaceTimeField, TorusGrid};
pub use hamiltonian::{
    bounds_ledger, case_feasibility, check_chain_condition, chi, coupling_constants, legendre,
    predicted_sup_bound, superlinearity_diagnostic, BoundsLedger, CaseFeasibility, ChainReport,
    CouplingLaw, IterationCase, KineticHamiltonian, Monotonicity, SystemSpec,
};
pub use scalar::{
    auto_sigma, evolve_scalar, numerical_hamiltonian, residual, residual_with, solve_increasing,
    solve_increasing_from, standalone_problem, ScalarProblem, SchemeParams, Viscosity,
};
pub use semigroup::{
    aubry_set, backward_step, check_domination, default_aubry_tol, forward_limit,
    solve_decreasing, solve_decreasing_detailed, t_plus, DecreasingPipeline, DominationReport,
    LagrangianTable, SemigroupRun,
};
