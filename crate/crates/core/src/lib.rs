//! Solvers for discrete quasi-variational inequalities of monotone systems
//! with interconnected obstacles
//!
//! `min(F_i(u), u^i - max_{j != i}(u^j - c^{i,j})) = 0`,
//!
//! via the penalized equation and semismooth Newton, plus the regularization
//! iterations, the zero-cost limit and reference oracles.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix `f64`.

// `!(x > 0)` is how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod error;
pub mod field;
pub mod newton;
pub mod oracle;
pub mod pde;
pub mod penalty;
pub mod regions;
pub mod regularize;
pub mod residual;
pub mod scalar;
pub mod sparse;
pub mod system;

pub use costs::SwitchingCosts;
pub use error::{QviError, Result};
pub use field::RegimeField;
pub use newton::{
    solve_obstacle, solve_penalized, solve_root, NewtonConfig, Obstacle, ObstacleProblem,
    SolveReport,
};
pub use pde::{assemble, reward_values, PdeParams, RewardFunction, RewardPiece};
pub use oracle::{active_set_enumerate, pseudo_time_solve, random_affine_system, MarchReport};
pub use penalty::PenaltyFunction;
pub use regions::{extract_regions, RegionReport};
pub use regularize::{
    apply_q, apply_q_rho, apply_t, apply_t_rho, estimate_c, hjb_limit_solve, iterate_to_fixed_point,
    penalty_error_bound, phi_minimize, strict_supersolution, zero_cost_gap_bound, ContractionMode,
    ErrorConstants, FixedPointRun, HjbSolution, PhiMinimum, SweepMap, Sweeper,
};
pub use residual::{
    a_priori_bound, intervention, intervention_field, obstacle_gap, penalized_residual,
    penalized_slant, qvi_residual, sup_norm, Intervention, PenalizedProblem,
};
pub use scalar::Real;
pub use sparse::{linear_solve, SolveError, SparseMatrix};
pub use system::{AffineSystem, MonotoneSystem, PolicySystem, ShiftedSystem};

pub type Field = RegimeField<f64>;
pub type Costs = SwitchingCosts<f64>;
pub type Penalty = PenaltyFunction<f64>;
pub type Matrix = SparseMatrix<f64>;
pub type Affine = AffineSystem<f64>;
