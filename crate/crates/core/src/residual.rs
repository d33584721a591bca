//! Residuals of the QVI and of its penalized approximation.

use crate::costs::SwitchingCosts;
use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::penalty::PenaltyFunction;
use crate::scalar::Real;
use crate::sparse::SparseMatrix;
use crate::system::MonotoneSystem;

/// `(M_i u)_l = max_{j != i} (u^j_l - c^{i,j})` and the maximizing regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Intervention<S> {
    pub values: Vec<S>,
    /// Arg-max regime per node; ties go to the lowest index.
    pub argmax: Vec<usize>,
}

fn check_costs<S: Real>(u: &RegimeField<S>, costs: &SwitchingCosts<S>) -> Result<()> {
    if costs.regimes() != u.regimes() {
        return Err(QviError::DimensionMismatch {
            expected: (costs.regimes(), u.nodes()),
            found: u.dims(),
        });
    }
    Ok(())
}

pub fn intervention<S: Real>(
    u: &RegimeField<S>,
    costs: &SwitchingCosts<S>,
    regime: usize,
) -> Result<Intervention<S>> {
    check_costs(u, costs)?;
    if regime >= u.regimes() {
        return Err(QviError::InvalidParameter(format!(
            "regime {regime} out of range 0..{}",
            u.regimes()
        )));
    }
    let mut values = vec![S::neg_infinity(); u.nodes()];
    let mut argmax = vec![usize::MAX; u.nodes()];
    for j in (0..u.regimes()).filter(|&j| j != regime) {
        let c = costs.cost(regime, j);
        for (l, &uj) in u.regime(j).iter().enumerate() {
            let v = uj - c;
            if v > values[l] {
                values[l] = v;
                argmax[l] = j;
            }
        }
    }
    Ok(Intervention { values, argmax })
}

/// `M u` for every regime at once.
pub fn intervention_field<S: Real>(
    u: &RegimeField<S>,
    costs: &SwitchingCosts<S>,
) -> Result<RegimeField<S>> {
    check_costs(u, costs)?;
    let mut out = RegimeField::zeros(u.regimes(), u.nodes());
    for i in 0..u.regimes() {
        out.regime_mut(i)
            .copy_from_slice(&intervention(u, costs, i)?.values);
    }
    Ok(out)
}

/// Obstacle gap `u^i - M_i u` for every regime.
pub fn obstacle_gap<S: Real>(
    u: &RegimeField<S>,
    costs: &SwitchingCosts<S>,
) -> Result<RegimeField<S>> {
    Ok(u.sub(&intervention_field(u, costs)?))
}

/// `G_i(u) = min(F_i(u), u^i - M_i u)`. Rejects zero costs.
pub fn qvi_residual<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    system: &F,
    costs: &SwitchingCosts<S>,
) -> Result<RegimeField<S>> {
    u.check_dims(system.regimes(), system.nodes())?;
    costs.ensure_positive()?;
    let f = system.evaluate(u);
    Ok(f.zip_map(&obstacle_gap(u, costs)?, S::min))
}

pub fn sup_norm<S: Real>(x: &RegimeField<S>) -> S {
    x.sup_norm()
}

/// `||F(0)|| / gamma`.
pub fn a_priori_bound<S: Real, F: MonotoneSystem<S>>(system: &F) -> S {
    system.a_priori_bound()
}

/// How the penalty argument `y^{i,j}_l` is formed from the unknown `v`:
///
/// `y = w^j_l - c^{i,j} - v^i_l - eps * (v^i_l - a^i_l)`
///
/// where `w` is either `v` itself or a frozen field, and `a` is the
/// pseudo-time anchor (only read when `eps != 0`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct PenaltyCoupling<'a, S> {
    pub frozen: Option<&'a RegimeField<S>>,
    pub eps: S,
    pub anchor: Option<&'a RegimeField<S>>,
}

impl<'a, S: Real> PenaltyCoupling<'a, S> {
    pub fn plain() -> Self {
        Self {
            frozen: None,
            eps: S::zero(),
            anchor: None,
        }
    }

    #[inline]
    fn argument(&self, v: &RegimeField<S>, costs: &SwitchingCosts<S>, i: usize, j: usize, l: usize) -> S {
        let w = self.frozen.unwrap_or(v);
        let mut y = w.get(j, l) - costs.cost(i, j) - v.get(i, l);
        if self.eps != S::zero() {
            let a = self.anchor.map_or(S::zero(), |a| a.get(i, l));
            y = y - self.eps * (v.get(i, l) - a);
        }
        y
    }

    /// `F(v) - rho * sum_j pi(y^{i,j})`.
    pub fn residual<F: MonotoneSystem<S>>(
        &self,
        v: &RegimeField<S>,
        system: &F,
        costs: &SwitchingCosts<S>,
        rho: S,
        penalty: &PenaltyFunction<S>,
    ) -> RegimeField<S> {
        let mut g = system.evaluate(v);
        if rho == S::zero() {
            return g;
        }
        let (d, n) = v.dims();
        for i in 0..d {
            for l in 0..n {
                let s: S = (0..d)
                    .filter(|&j| j != i)
                    .map(|j| penalty.value(self.argument(v, costs, i, j, l)))
                    .sum();
                let k = v.index(i, l);
                g.as_mut_slice()[k] = g.as_slice()[k] - rho * s;
            }
        }
        g
    }

    /// Slant of `residual`: slant of `F` plus the penalty rows.
    pub fn slant<F: MonotoneSystem<S>>(
        &self,
        v: &RegimeField<S>,
        system: &F,
        costs: &SwitchingCosts<S>,
        rho: S,
        penalty: &PenaltyFunction<S>,
    ) -> SparseMatrix<S> {
        let base = system.slant(v);
        if rho == S::zero() {
            return base;
        }
        let (d, n) = v.dims();
        let mut extra = Vec::new();
        for i in 0..d {
            for l in 0..n {
                let row = v.index(i, l);
                for j in (0..d).filter(|&j| j != i) {
                    let h = penalty.subderivative(self.argument(v, costs, i, j, l));
                    if h == S::zero() {
                        continue;
                    }
                    extra.push((row, row, rho * h * (S::one() + self.eps)));
                    if self.frozen.is_none() {
                        extra.push((row, v.index(j, l), -rho * h));
                    }
                }
            }
        }
        if extra.is_empty() {
            return base;
        }
        let size = base.nrows();
        SparseMatrix::from_triplets(size, size, base.triplets().chain(extra))
    }
}

/// The penalized equation `G^rho(u) = F(u) - rho * sum_{j != i} pi(u^j - c^{i,j} - u^i) = 0`.
#[derive(Debug, Clone)]
pub struct PenalizedProblem<S, F> {
    pub system: F,
    pub costs: SwitchingCosts<S>,
    pub rho: S,
    pub penalty: PenaltyFunction<S>,
}

impl<S: Real, F: MonotoneSystem<S>> PenalizedProblem<S, F> {
    pub fn new(
        system: F,
        costs: SwitchingCosts<S>,
        rho: S,
        penalty: PenaltyFunction<S>,
    ) -> Result<Self> {
        if !(rho >= S::zero()) || !rho.is_finite() {
            return Err(QviError::InvalidParameter(format!(
                "penalty parameter must be finite and non-negative, got {rho}"
            )));
        }
        if costs.regimes() != system.regimes() {
            return Err(QviError::DimensionMismatch {
                expected: system.dims(),
                found: (costs.regimes(), system.nodes()),
            });
        }
        Ok(Self {
            system,
            costs,
            rho,
            penalty,
        })
    }

    /// Penalty `y^+` with the given parameter.
    pub fn linear(system: F, costs: SwitchingCosts<S>, rho: S) -> Result<Self> {
        Self::new(system, costs, rho, PenaltyFunction::linear())
    }

    pub fn residual(&self, u: &RegimeField<S>) -> Result<RegimeField<S>> {
        u.check_dims(self.system.regimes(), self.system.nodes())?;
        Ok(PenaltyCoupling::plain().residual(u, &self.system, &self.costs, self.rho, &self.penalty))
    }

    pub fn slant(&self, u: &RegimeField<S>) -> Result<SparseMatrix<S>> {
        u.check_dims(self.system.regimes(), self.system.nodes())?;
        if !self.penalty.is_linear() {
            return Err(QviError::UnsupportedPenaltyDegree(self.penalty.sigma().as_f64()));
        }
        Ok(PenaltyCoupling::plain().slant(u, &self.system, &self.costs, self.rho, &self.penalty))
    }

    /// Same problem with another penalty parameter.
    pub fn with_rho(&self, rho: S) -> Result<Self>
    where
        F: Clone,
    {
        Self::new(self.system.clone(), self.costs.clone(), rho, self.penalty)
    }
}

pub fn penalized_residual<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    prob: &PenalizedProblem<S, F>,
) -> Result<RegimeField<S>> {
    prob.residual(u)
}

pub fn penalized_slant<S: Real, F: MonotoneSystem<S>>(
    u: &RegimeField<S>,
    prob: &PenalizedProblem<S, F>,
) -> Result<SparseMatrix<S>> {
    prob.slant(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::AffineSystem;

    fn field(rows: Vec<Vec<f64>>) -> RegimeField<f64> {
        RegimeField::from_regimes(rows).unwrap()
    }

    /// `F_i(u) = u^i - b_i` on a single node.
    fn shifted_identity(b: Vec<f64>) -> AffineSystem<f64> {
        let d = b.len();
        AffineSystem::new(d, 1, SparseMatrix::identity(d), b, 1.0).unwrap()
    }

    #[test]
    fn intervention_single_competitor() {
        let u = field(vec![vec![5.0], vec![3.0]]);
        let c = SwitchingCosts::uniform(2, 1.0).unwrap();
        let m = intervention(&u, &c, 0).unwrap();
        assert_eq!(m.values, vec![2.0]);
        assert_eq!(m.argmax, vec![1]);
    }

    #[test]
    fn intervention_per_pair_costs() {
        let u = field(vec![vec![0.0], vec![4.0], vec![4.0]]);
        let c = SwitchingCosts::from_matrix(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let m = intervention(&u, &c, 0).unwrap();
        assert_eq!(m.values, vec![3.0]);
        assert_eq!(m.argmax, vec![1]);
    }

    #[test]
    fn intervention_ties_go_to_lowest_regime() {
        let u = field(vec![vec![0.0], vec![4.0], vec![4.0]]);
        let c = SwitchingCosts::uniform(3, 1.0).unwrap();
        assert_eq!(intervention(&u, &c, 0).unwrap().argmax, vec![1]);
    }

    #[test]
    fn intervention_rejects_mismatch() {
        let u = field(vec![vec![0.0], vec![1.0]]);
        let c = SwitchingCosts::uniform(3, 1.0).unwrap();
        assert!(matches!(
            intervention(&u, &c, 0),
            Err(QviError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn qvi_residual_zero_solution() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 1.0).unwrap();
        let g = qvi_residual(&RegimeField::zeros(2, 1), &sys, &c).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn qvi_residual_negative_below_obstacle() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 1.0).unwrap();
        let u = field(vec![vec![0.0], vec![3.0]]);
        let g = qvi_residual(&u, &sys, &c).unwrap();
        assert!(g.get(0, 0) < 0.0);
    }

    #[test]
    fn qvi_residual_rejects_zero_cost() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 0.0).unwrap();
        assert!(matches!(
            qvi_residual(&RegimeField::zeros(2, 1), &sys, &c),
            Err(QviError::ZeroCost { .. })
        ));
    }

    #[test]
    fn rho_zero_residual_is_f() {
        let sys = shifted_identity(vec![0.3, -0.7]);
        let c = SwitchingCosts::uniform(2, 0.0).unwrap();
        let prob = PenalizedProblem::linear(&sys, c, 0.0).unwrap();
        let u = field(vec![vec![2.0], vec![-1.0]]);
        assert_eq!(prob.residual(&u).unwrap(), sys.evaluate(&u));
    }

    #[test]
    fn hand_solved_two_by_two() {
        // u1 - (u2 - u1)^+ = 0, u2 - 2 - (u1 - u2)^+ = 0  =>  (1, 2)
        let sys = shifted_identity(vec![0.0, 2.0]);
        let c = SwitchingCosts::uniform(2, 0.0).unwrap();
        let prob = PenalizedProblem::linear(&sys, c, 1.0).unwrap();
        let u = field(vec![vec![1.0], vec![2.0]]);
        assert_eq!(prob.residual(&u).unwrap().sup_norm(), 0.0);
        let off = field(vec![vec![2.0 / 3.0], vec![4.0 / 3.0]]);
        assert!(prob.residual(&off).unwrap().sup_norm() > 0.5);
    }

    #[test]
    fn slant_without_active_penalties_is_base() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 1.0).unwrap();
        let prob = PenalizedProblem::linear(&sys, c, 5.0).unwrap();
        let u = field(vec![vec![0.2], vec![0.1]]);
        assert_eq!(prob.slant(&u).unwrap(), sys.slant(&u));
    }

    #[test]
    fn slant_assembly_rule() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 0.5).unwrap();
        let prob = PenalizedProblem::linear(&sys, c, 5.0).unwrap();
        // u2 - c - u1 = 0.1 > 0
        let u = field(vec![vec![0.0], vec![0.6]]);
        let l = prob.slant(&u).unwrap();
        assert!((l.get(0, 0) - 6.0).abs() < 1e-15);
        assert_eq!(l.get(0, 1), -5.0);
        assert_eq!(l.get(1, 1), 1.0);
        assert_eq!(l.get(1, 0), 0.0);
    }

    #[test]
    fn slant_rejects_nonlinear_penalty() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 0.5).unwrap();
        let prob = PenalizedProblem::new(&sys, c, 1.0, PenaltyFunction::new(2.0)).unwrap();
        assert!(matches!(
            prob.slant(&RegimeField::zeros(2, 1)),
            Err(QviError::UnsupportedPenaltyDegree(_))
        ));
    }

    #[test]
    fn negative_rho_rejected() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        let c = SwitchingCosts::uniform(2, 0.5).unwrap();
        assert!(PenalizedProblem::linear(&sys, c, -1.0).is_err());
    }

    #[test]
    fn a_priori_bound_of_zero_forcing() {
        let sys = shifted_identity(vec![0.0, 0.0]);
        assert_eq!(a_priori_bound(&sys), 0.0);
        assert_eq!(sup_norm(&field(vec![vec![-3.0, 2.0], vec![1.0, -4.0]])), 4.0);
    }
}
