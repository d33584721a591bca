use crate::costs::SwitchingCosts;
use crate::error::Result;
use crate::field::RegimeField;
use crate::newton::{solve_penalized, solve_root, NewtonConfig};
use crate::residual::PenalizedProblem;
use crate::scalar::Real;
use crate::system::{MonotoneSystem, ShiftedSystem};

/// A field `w` with `min(F_i(w), w^i - M_i w) = kappa`, computed as the
/// penalized solution at `rho` of the QVI for `F - kappa` with costs
/// `c - kappa`. The residual is off by `O(1/rho)`.
pub fn strict_supersolution<S: Real, F: MonotoneSystem<S>>(
    system: &F,
    costs: &SwitchingCosts<S>,
    kappa: S,
    rho: S,
    cfg: &NewtonConfig,
) -> Result<RegimeField<S>> {
    let reduced = costs.reduced_by(kappa)?;
    let shifted = ShiftedSystem::new(system, kappa);
    let (d, n) = system.dims();
    let (start, _) = solve_root(&shifted, &RegimeField::zeros(d, n), cfg)?;
    let prob = PenalizedProblem::linear(&shifted, reduced, rho)?;
    Ok(solve_penalized(&prob, &start, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::qvi_residual;
    use crate::sparse::SparseMatrix;
    use crate::system::AffineSystem;

    #[test]
    fn scaled_identity_gives_constant() {
        let gamma: f64 = 0.5;
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, gamma), (1, 1, gamma)]);
        let sys = AffineSystem::new(2, 1, m, vec![0.0, 0.0], gamma).unwrap();
        let costs = SwitchingCosts::uniform(2, 1.0).unwrap();
        let w = strict_supersolution(&sys, &costs, 0.5, 1e6, &NewtonConfig::default()).unwrap();
        assert!(w.as_slice().iter().all(|v: &f64| (v - 1.0).abs() < 1e-12));
        let g = qvi_residual(&w, &sys, &costs).unwrap();
        assert!(g.as_slice().iter().all(|v: &f64| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn kappa_at_least_cost_rejected() {
        let sys = AffineSystem::new(2, 1, SparseMatrix::identity(2), vec![0.0, 0.0], 1.0).unwrap();
        let costs = SwitchingCosts::uniform(2, 1.0).unwrap();
        assert!(strict_supersolution(&sys, &costs, 1.0, 1e3, &NewtonConfig::default()).is_err());
    }
}
