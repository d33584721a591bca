//! Regularization iterations for the QVI: iterated optimal stopping (`Q`),
//! its time-marching variant (`T`), and the penalized auxiliary iterations
//! (`Q_rho`, `T_rho`). Also the error-bound constants, strict
//! supersolutions and the zero-cost limit.

pub mod constants;
pub mod hjb;
pub mod supersolution;

use serde::Serialize;

use crate::costs::SwitchingCosts;
use crate::error::Result;
use crate::field::RegimeField;
use crate::newton::{solve_coupled, solve_obstacle, NewtonConfig, ObstacleProblem};
use crate::penalty::PenaltyFunction;
use crate::residual::{intervention_field, PenalizedProblem, PenaltyCoupling};
use crate::scalar::Real;
use crate::system::MonotoneSystem;

pub use constants::{
    estimate_c, penalty_error_bound, phi_minimize, ContractionMode, ErrorConstants, PhiMinimum,
};
pub use hjb::{hjb_limit_solve, zero_cost_gap_bound, HjbSolution};
pub use supersolution::strict_supersolution;

/// `Qu`: solve `min(F_i(v), v^i - M_i u) = 0` with the obstacle frozen at `u`.
pub fn apply_q<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    system: &F,
    costs: &SwitchingCosts<S>,
    cfg: &NewtonConfig,
) -> Result<RegimeField<S>> {
    costs.ensure_positive()?;
    let psi = intervention_field(u, costs)?;
    let prob = ObstacleProblem::frozen(system, psi)?;
    Ok(solve_obstacle(&prob, u, cfg)?.0)
}

/// `Tu`: solve `min(F_i(v), v^i - M_i v + eps (v^i - u^i)) = 0`.
pub fn apply_t<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    system: &F,
    costs: &SwitchingCosts<S>,
    eps: S,
    cfg: &NewtonConfig,
) -> Result<RegimeField<S>> {
    costs.ensure_positive()?;
    let prob = ObstacleProblem::time_marching(system, costs.clone(), eps, u.clone())?;
    Ok(solve_obstacle(&prob, u, cfg)?.0)
}

/// `Q_rho u`: solve `F_i(v) - rho sum_{j != i} pi(u^j - c^{i,j} - v^i) = 0`.
pub fn apply_q_rho<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    prob: &PenalizedProblem<S, F>,
    cfg: &NewtonConfig,
) -> Result<RegimeField<S>> {
    let coupling = PenaltyCoupling {
        frozen: Some(u),
        eps: S::zero(),
        anchor: None,
    };
    solve_with(u, prob, coupling, cfg)
}

/// `T_rho u`: the penalty argument is `v^j - c^{i,j} - v^i - eps (v^i - u^i)`.
pub fn apply_t_rho<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    prob: &PenalizedProblem<S, F>,
    eps: S,
    cfg: &NewtonConfig,
) -> Result<RegimeField<S>> {
    let coupling = PenaltyCoupling {
        frozen: None,
        eps,
        anchor: Some(u),
    };
    solve_with(u, prob, coupling, cfg)
}

fn solve_with<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    prob: &PenalizedProblem<S, F>,
    coupling: PenaltyCoupling<'_, S>,
    cfg: &NewtonConfig,
) -> Result<RegimeField<S>> {
    let (v, _) = solve_coupled(
        &prob.system,
        &prob.costs,
        prob.rho,
        &prob.penalty,
        coupling,
        u,
        cfg,
    )?;
    Ok(v)
}

/// One of the four sweep maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMap<S> {
    Q,
    T { eps: S },
    QRho { rho: S },
    TRho { rho: S, eps: S },
}

/// Everything a sweep needs besides the iterate.
#[derive(Debug, Clone)]
pub struct Sweeper<'a, S, F> {
    pub system: &'a F,
    pub costs: &'a SwitchingCosts<S>,
    pub newton: NewtonConfig,
}

impl<'a, S: Real, F: MonotoneSystem<S>> Sweeper<'a, S, F> {
    pub fn new(system: &'a F, costs: &'a SwitchingCosts<S>) -> Self {
        Self {
            system,
            costs,
            newton: NewtonConfig::default(),
        }
    }

    pub fn apply(&self, map: SweepMap<S>, u: &RegimeField<S>) -> Result<RegimeField<S>> {
        match map {
            SweepMap::Q => apply_q(u, self.system, self.costs, &self.newton),
            SweepMap::T { eps } => apply_t(u, self.system, self.costs, eps, &self.newton),
            SweepMap::QRho { rho } => apply_q_rho(u, &self.penalized(rho)?, &self.newton),
            SweepMap::TRho { rho, eps } => {
                apply_t_rho(u, &self.penalized(rho)?, eps, &self.newton)
            }
        }
    }

    fn penalized(&self, rho: S) -> Result<PenalizedProblem<S, &'a F>> {
        PenalizedProblem::new(self.system, self.costs.clone(), rho, PenaltyFunction::linear())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointRun<S> {
    pub solution: RegimeField<S>,
    /// Every iterate, starting with the initial point.
    pub iterates: Vec<RegimeField<S>>,
    /// `||u^{n+1} - u^n||` per sweep.
    pub increments: Vec<S>,
    pub sweeps: usize,
    pub converged: bool,
    /// Most negative entry of `u^{n+1} - u^n` seen, when below `-1e-8`.
    pub non_monotone: Option<S>,
}

/// Runs `u <- map(u)` until the sweep increment drops below `tol` or
/// `max_sweeps` is reached.
pub fn iterate_to_fixed_point<S: Real, F: MonotoneSystem<S>>(
    sweeper: &Sweeper<'_, S, F>,
    map: SweepMap<S>,
    start: &RegimeField<S>,
    max_sweeps: usize,
    tol: S,
) -> Result<FixedPointRun<S>> {
    let mut u = start.clone();
    let mut run = FixedPointRun {
        solution: u.clone(),
        iterates: vec![u.clone()],
        increments: Vec::new(),
        sweeps: 0,
        converged: false,
        non_monotone: None,
    };
    let floor = S::lit(-1e-8);
    for sweep in 1..=max_sweeps {
        let next = sweeper.apply(map, &u)?;
        let drop = -u.max_diff(&next);
        if drop < floor {
            log::warn!("sweep {sweep} decreased the iterate by {:e}", -drop.as_f64());
            run.non_monotone = Some(run.non_monotone.map_or(drop, |m: S| m.min(drop)));
        }
        let inc = next.sup_dist(&u);
        run.increments.push(inc);
        run.iterates.push(next.clone());
        run.sweeps = sweep;
        u = next;
        if inc < tol {
            run.converged = true;
            break;
        }
    }
    run.solution = u;
    Ok(run)
}
