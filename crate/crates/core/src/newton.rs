//! Semismooth Newton for `F(u) = 0`, the penalized equation and obstacle
//! problems.
//!
//! Every solver runs the plain iteration `u <- u - L(u)^{-1} G(u)` and stops
//! once the relative increment `||u_k - u_{k-1}|| / max(||u_k||, scale)`
//! drops below `tol` and `||G(u_k)|| <= residual_tol`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::costs::SwitchingCosts;
use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::penalty::PenaltyFunction;
use crate::residual::{intervention, PenalizedProblem, PenaltyCoupling};
use crate::scalar::Real;
use crate::sparse::{linear_solve, SparseMatrix};
use crate::system::MonotoneSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub scale: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            scale: 1.0,
            residual_tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.tol.is_finite()
            && self.scale > 0.0
            && self.scale.is_finite()
            && self.residual_tol > 0.0
            && self.max_iter >= 1;
        if ok {
            Ok(())
        } else {
            Err(QviError::InvalidParameter(format!(
                "Newton config needs tol > 0, scale > 0, residual_tol > 0, max_iter >= 1: {self:?}"
            )))
        }
    }

    pub fn with_residual_tol(mut self, residual_tol: f64) -> Self {
        self.residual_tol = residual_tol;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Linear solves performed.
    pub iterations: usize,
    pub final_residual: f64,
    /// Relative increment after each iteration.
    pub increments: Vec<f64>,
    /// Residual sup-norm at the initial point and after each iteration.
    pub residuals: Vec<f64>,
    pub elapsed_seconds: f64,
    pub converged: bool,
}

/// The obstacle in `min(F_i(v), v^i - obstacle_i(v)) = 0`.
#[derive(Debug, Clone)]
pub enum Obstacle<S> {
    /// `v^i - psi^i` with `psi` fixed.
    Frozen(RegimeField<S>),
    /// `v^i - M_i v + eps (v^i - anchor^i)`, the time-marching form.
    TimeMarching {
        costs: SwitchingCosts<S>,
        eps: S,
        anchor: RegimeField<S>,
    },
}

#[derive(Debug, Clone)]
pub struct ObstacleProblem<S, F> {
    pub system: F,
    pub obstacle: Obstacle<S>,
}

impl<S: Real, F: MonotoneSystem<S>> ObstacleProblem<S, F> {
    pub fn frozen(system: F, psi: RegimeField<S>) -> Result<Self> {
        psi.check_dims(system.regimes(), system.nodes())?;
        Ok(Self {
            system,
            obstacle: Obstacle::Frozen(psi),
        })
    }

    pub fn time_marching(
        system: F,
        costs: SwitchingCosts<S>,
        eps: S,
        anchor: RegimeField<S>,
    ) -> Result<Self> {
        anchor.check_dims(system.regimes(), system.nodes())?;
        if costs.regimes() != system.regimes() {
            return Err(QviError::DimensionMismatch {
                expected: system.dims(),
                found: (costs.regimes(), system.nodes()),
            });
        }
        if !(eps >= S::zero()) || !eps.is_finite() {
            return Err(QviError::InvalidParameter(format!(
                "pseudo-time parameter must be finite and non-negative, got {eps}"
            )));
        }
        Ok(Self {
            system,
            obstacle: Obstacle::TimeMarching { costs, eps, anchor },
        })
    }

    /// Obstacle branch values and, per row, the slant row to use when the
    /// obstacle branch is selected (diagonal weight, optional coupled column).
    fn obstacle_branch(&self, v: &RegimeField<S>) -> (RegimeField<S>, Vec<(S, Option<usize>)>) {
        let (d, n) = v.dims();
        match &self.obstacle {
            Obstacle::Frozen(psi) => (v.sub(psi), vec![(S::one(), None); d * n]),
            Obstacle::TimeMarching { costs, eps, anchor } => {
                let mut out = RegimeField::zeros(d, n);
                let mut rows = Vec::with_capacity(d * n);
                for i in 0..d {
                    let m = intervention(v, costs, i).expect("dimensions checked");
                    for l in 0..n {
                        let vi = v.get(i, l);
                        out.set(i, l, vi - m.values[l] + *eps * (vi - anchor.get(i, l)));
                        rows.push((S::one() + *eps, Some(v.index(m.argmax[l], l))));
                    }
                }
                (out, rows)
            }
        }
    }

    pub fn residual(&self, v: &RegimeField<S>) -> RegimeField<S> {
        let f = self.system.evaluate(v);
        let (o, _) = self.obstacle_branch(v);
        f.zip_map(&o, S::min)
    }

    /// Row-switching slant: the `F` row where `F <= obstacle branch`, the
    /// obstacle row elsewhere.
    pub fn slant(&self, v: &RegimeField<S>) -> SparseMatrix<S> {
        let f = self.system.evaluate(v);
        let (o, rows) = self.obstacle_branch(v);
        let base = self.system.slant(v);
        let size = v.len();
        let mut trips = Vec::with_capacity(base.nnz());
        for (r, &(diag, coupled)) in rows.iter().enumerate() {
            if f.as_slice()[r] <= o.as_slice()[r] {
                trips.extend(base.row(r).map(|(c, x)| (r, c, x)));
            } else {
                trips.push((r, r, diag));
                if let Some(c) = coupled {
                    trips.push((r, c, -S::one()));
                }
            }
        }
        SparseMatrix::from_triplets(size, size, trips)
    }
}

fn fail_singular<S: Real>(iteration: usize, residual: S, u: &RegimeField<S>) -> QviError {
    QviError::SingularSlant {
        iteration,
        residual: residual.as_f64(),
        last_iterate: u.to_f64().into_vec(),
    }
}

/// The Newton loop shared by every solver in this module.
pub(crate) fn newton_loop<S: Real>(
    initial: &RegimeField<S>,
    cfg: &NewtonConfig,
    residual: impl Fn(&RegimeField<S>) -> RegimeField<S>,
    slant: impl Fn(&RegimeField<S>) -> SparseMatrix<S>,
) -> Result<(RegimeField<S>, SolveReport)> {
    cfg.validate()?;
    if !initial.is_finite() {
        return Err(QviError::InvalidParameter(
            "initial guess has non-finite entries".into(),
        ));
    }
    let start = Instant::now();
    let tol = S::lit(cfg.tol);
    let scale = S::lit(cfg.scale);
    let residual_tol = S::lit(cfg.residual_tol);

    let mut u = initial.clone();
    let mut g = residual(&u);
    let mut res = g.sup_norm();
    let mut report = SolveReport {
        residuals: vec![res.as_f64()],
        ..SolveReport::default()
    };

    for k in 1..=cfg.max_iter {
        let op = slant(&u);
        let rhs: Vec<S> = g.as_slice().iter().map(|&x| -x).collect();
        let delta = linear_solve(&op, &rhs).map_err(|_| fail_singular(k, res, &u))?;
        let next: Vec<S> = u.as_slice().iter().zip(&delta).map(|(a, b)| *a + *b).collect();
        let next = u.with_values(next);
        if !next.is_finite() {
            return Err(fail_singular(k, res, &u));
        }
        let inc = crate::scalar::sup_norm_slice(&delta) / next.sup_norm().max(scale);
        u = next;
        g = residual(&u);
        res = g.sup_norm();
        report.iterations = k;
        report.increments.push(inc.as_f64());
        report.residuals.push(res.as_f64());
        log::trace!("newton iteration {k}: increment {inc:e}, residual {res:e}");
        if inc < tol && res <= residual_tol {
            report.converged = true;
            break;
        }
    }
    report.final_residual = res.as_f64();
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    if !report.converged {
        return Err(QviError::MaxIterExceeded {
            iterations: report.iterations,
            residual: report.final_residual,
            last_iterate: u.to_f64().into_vec(),
        });
    }
    Ok((u, report))
}

/// Solves `F(u) = 0`.
pub fn solve_root<S: Real, F: MonotoneSystem<S>>(
    system: &F,
    initial: &RegimeField<S>,
    cfg: &NewtonConfig,
) -> Result<(RegimeField<S>, SolveReport)> {
    initial.check_dims(system.regimes(), system.nodes())?;
    newton_loop(initial, cfg, |u| system.evaluate(u), |u| system.slant(u))
}

/// Solves `G^rho(u) = 0`. Requires the linear penalty.
pub fn solve_penalized<S: Real, F: MonotoneSystem<S>>(
    prob: &PenalizedProblem<S, F>,
    initial: &RegimeField<S>,
    cfg: &NewtonConfig,
) -> Result<(RegimeField<S>, SolveReport)> {
    solve_coupled(
        &prob.system,
        &prob.costs,
        prob.rho,
        &prob.penalty,
        PenaltyCoupling::plain(),
        initial,
        cfg,
    )
}

pub(crate) fn solve_coupled<S: Real, F: MonotoneSystem<S>>(
    system: &F,
    costs: &SwitchingCosts<S>,
    rho: S,
    penalty: &PenaltyFunction<S>,
    coupling: PenaltyCoupling<'_, S>,
    initial: &RegimeField<S>,
    cfg: &NewtonConfig,
) -> Result<(RegimeField<S>, SolveReport)> {
    initial.check_dims(system.regimes(), system.nodes())?;
    if !penalty.is_linear() {
        return Err(QviError::UnsupportedPenaltyDegree(penalty.sigma().as_f64()));
    }
    newton_loop(
        initial,
        cfg,
        |u| coupling.residual(u, system, costs, rho, penalty),
        |u| coupling.slant(u, system, costs, rho, penalty),
    )
}

/// Solves `min(F_i(v), obstacle branch) = 0`.
pub fn solve_obstacle<S: Real, F: MonotoneSystem<S>>(
    prob: &ObstacleProblem<S, F>,
    initial: &RegimeField<S>,
    cfg: &NewtonConfig,
) -> Result<(RegimeField<S>, SolveReport)> {
    initial.check_dims(prob.system.regimes(), prob.system.nodes())?;
    newton_loop(initial, cfg, |v| prob.residual(v), |v| prob.slant(v))
}
