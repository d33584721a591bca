//! The zero-switching-cost limit `min_i F_i(u, ..., u) = 0`, reached through
//! the penalized equation with `c = 0`.

use serde::Serialize;

use crate::costs::SwitchingCosts;
use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::newton::{solve_penalized, solve_root, NewtonConfig, SolveReport};
use crate::residual::PenalizedProblem;
use crate::scalar::Real;
use crate::system::MonotoneSystem;

#[derive(Debug, Clone, Serialize)]
pub struct HjbSolution<S> {
    /// Regime-wise maximum of the final penalized solution.
    pub collapsed: Vec<S>,
    pub rhos: Vec<S>,
    pub solutions: Vec<RegimeField<S>>,
    pub reports: Vec<SolveReport>,
    /// `max_{i,j} ||u^{rho,i} - u^{rho,j}||` per rho.
    pub regime_gaps: Vec<S>,
}

impl<S: Real> HjbSolution<S> {
    pub fn final_solution(&self) -> &RegimeField<S> {
        self.solutions.last().expect("schedule is non-empty")
    }

    pub fn final_report(&self) -> &SolveReport {
        self.reports.last().expect("schedule is non-empty")
    }
}

/// Solves the `c = 0` penalized problem for every `rho` in the (increasing)
/// schedule, each from the root of `F`.
pub fn hjb_limit_solve<S: Real, F: MonotoneSystem<S>>(
    system: &F,
    rho_schedule: &[S],
    cfg: &NewtonConfig,
) -> Result<HjbSolution<S>> {
    if rho_schedule.is_empty() {
        return Err(QviError::InvalidParameter("empty rho schedule".into()));
    }
    if rho_schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QviError::InvalidParameter(
            "rho schedule must be strictly increasing".into(),
        ));
    }
    let (d, n) = system.dims();
    let costs = SwitchingCosts::uniform(d, S::zero())?;
    let (root, _) = solve_root(system, &RegimeField::zeros(d, n), cfg)?;
    let mut out = HjbSolution {
        collapsed: Vec::new(),
        rhos: rho_schedule.to_vec(),
        solutions: Vec::with_capacity(rho_schedule.len()),
        reports: Vec::with_capacity(rho_schedule.len()),
        regime_gaps: Vec::with_capacity(rho_schedule.len()),
    };
    for &rho in rho_schedule {
        let prob = PenalizedProblem::linear(system, costs.clone(), rho)?;
        let (u, report) = solve_penalized(&prob, &root, cfg)?;
        out.regime_gaps.push(u.regime_gap());
        out.solutions.push(u);
        out.reports.push(report);
    }
    out.collapsed = out.final_solution().regime_max();
    Ok(out)
}

/// Checks `0 <= u^rho - u^{c,rho} <= (d - 1) c rho / gamma` componentwise
/// (with `1e-8` slack) and returns the largest observed gap.
pub fn zero_cost_gap_bound<S: Real>(
    u_c_rho: &RegimeField<S>,
    u_rho: &RegimeField<S>,
    c: S,
    rho: S,
    regimes: usize,
    gamma: S,
) -> Result<S> {
    u_c_rho.check_dims(u_rho.regimes(), u_rho.nodes())?;
    let upper = S::lit((regimes - 1) as f64) * c * rho / gamma;
    let slack = S::lit(1e-8);
    let mut worst = S::zero();
    for i in 0..u_rho.regimes() {
        for l in 0..u_rho.nodes() {
            let gap = u_rho.get(i, l) - u_c_rho.get(i, l);
            if gap < -slack || gap > upper + slack {
                return Err(QviError::BoundViolation {
                    regime: i,
                    node: l,
                    detail: format!("gap {gap:e} outside [0, {upper:e}]"),
                });
            }
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}
