//! Switching regions: nodes where the obstacle binds.

use serde::Serialize;

use crate::costs::SwitchingCosts;
use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::newton::{solve_penalized, solve_root, NewtonConfig};
use crate::residual::{obstacle_gap, PenalizedProblem};
use crate::scalar::Real;
use crate::system::MonotoneSystem;

/// Reference solves use `reference_factor * rho`.
pub const REFERENCE_FACTOR: f64 = 100.0;
/// A node is in the exact region when its reference gap is at most this.
pub const REGION_TOL: f64 = 1e-6;
/// Safety factor in the `C0` estimate.
pub const C0_SAFETY: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRegions {
    pub exact: Vec<usize>,
    pub estimated: Vec<usize>,
    /// Nodes in exactly one of the two sets.
    pub mismatch: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub regimes: Vec<RegimeRegions>,
    pub c0_estimate: f64,
    pub threshold: f64,
    pub rho_used: f64,
    pub rho_reference: f64,
    pub matches: bool,
    /// Every exact region is contained in its estimate.
    pub inclusion: bool,
}

/// `{l : u^i_l - (M_i u)_l <= tol}` per regime.
pub fn exact_regions<S: Real>(
    u: &RegimeField<S>,
    costs: &SwitchingCosts<S>,
    tol: S,
) -> Result<Vec<Vec<usize>>> {
    let gap = obstacle_gap(u, costs)?;
    Ok((0..u.regimes())
        .map(|i| (0..u.nodes()).filter(|&l| gap.get(i, l) <= tol).collect())
        .collect())
}

/// `{l : |u^i_l - (M_i u)_l| <= threshold}` per regime.
pub fn estimated_regions<S: Real>(
    u: &RegimeField<S>,
    costs: &SwitchingCosts<S>,
    threshold: S,
) -> Result<Vec<Vec<usize>>> {
    let gap = obstacle_gap(u, costs)?;
    Ok((0..u.regimes())
        .map(|i| (0..u.nodes()).filter(|&l| gap.get(i, l).abs() <= threshold).collect())
        .collect())
}

/// `C0 rho^{-1} ln rho`, the estimated-region width for the linear penalty.
pub fn region_threshold(c0: f64, rho: f64) -> f64 {
    c0 * rho.ln() / rho
}

/// `4 rho ||u^{2 rho} - u^rho|| / ln rho`.
pub fn estimate_c0(increment: f64, rho: f64) -> f64 {
    C0_SAFETY * rho * increment / rho.ln()
}

/// Residual tolerance for a penalized solve at `rho`: roundoff in the
/// penalty term grows like `rho * ||u|| * eps`.
pub fn residual_tol_for(cfg: &NewtonConfig, rho: f64, bound: f64) -> f64 {
    cfg.residual_tol.max(1e-15 * rho * (1.0 + bound))
}

/// Compares the estimated regions at `rho` with exact regions taken from a
/// `100 rho` reference solve. `c0` is estimated from the `2 rho` solve when
/// absent.
pub fn extract_regions<S: Real, F: MonotoneSystem<S>>(
    system: &F,
    costs: &SwitchingCosts<S>,
    rho: f64,
    c0: Option<f64>,
    cfg: &NewtonConfig,
) -> Result<RegionReport> {
    costs.ensure_positive()?;
    if !(rho > 1.0) {
        return Err(QviError::InvalidParameter(format!(
            "region estimate needs rho > 1, got {rho}"
        )));
    }
    let (d, n) = system.dims();
    let bound = system.a_priori_bound().as_f64();
    let (root, _) = solve_root(system, &RegimeField::zeros(d, n), cfg)?;
    let solve = |r: f64| -> Result<RegimeField<S>> {
        let prob = PenalizedProblem::linear(system, costs.clone(), S::lit(r))?;
        let cfg = cfg.with_residual_tol(residual_tol_for(cfg, r, bound));
        Ok(solve_penalized(&prob, &root, &cfg)?.0)
    };
    let u = solve(rho)?;
    let c0 = match c0 {
        Some(c0) => c0,
        None => estimate_c0(solve(2.0 * rho)?.sup_dist(&u).as_f64(), rho),
    };
    let threshold = region_threshold(c0, rho);
    let rho_reference = REFERENCE_FACTOR * rho;
    let reference = solve(rho_reference)?;
    let exact = exact_regions(&reference, costs, S::lit(REGION_TOL))?;
    let estimated = estimated_regions(&u, costs, S::lit(threshold))?;

    let regimes: Vec<RegimeRegions> = exact
        .into_iter()
        .zip(estimated)
        .map(|(exact, estimated)| {
            let mismatch = (0..n)
                .filter(|l| exact.contains(l) != estimated.contains(l))
                .collect();
            RegimeRegions {
                exact,
                estimated,
                mismatch,
            }
        })
        .collect();
    let matches = regimes.iter().all(|r| r.mismatch.is_empty());
    let inclusion = regimes
        .iter()
        .all(|r| r.exact.iter().all(|l| r.estimated.contains(l)));
    Ok(RegionReport {
        regimes,
        c0_estimate: c0,
        threshold,
        rho_used: rho,
        rho_reference,
        matches,
        inclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use crate::system::AffineSystem;

    #[test]
    fn region_sets() {
        let u = RegimeField::from_regimes(vec![vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let costs = SwitchingCosts::uniform(2, 0.5).unwrap();
        // gaps: regime 0: -0.5, 0.5, 2.5; regime 1: 1.5, 0.5, -1.5
        assert_eq!(exact_regions(&u, &costs, 1e-6).unwrap(), vec![vec![0], vec![2]]);
        assert_eq!(
            estimated_regions(&u, &costs, 0.6).unwrap(),
            vec![vec![0, 1], vec![1]]
        );
    }

    #[test]
    fn large_cost_gives_empty_regions() {
        let sys = AffineSystem::new(2, 2, SparseMatrix::identity(4), vec![0.3, -0.2, 0.1, 0.4], 1.0).unwrap();
        // c > 2 ||F(0)|| / gamma = 0.8
        let costs = SwitchingCosts::uniform(2, 1.0).unwrap();
        let rep = extract_regions(&sys, &costs, 1e3, Some(1.0), &NewtonConfig::default()).unwrap();
        assert!(rep.regimes.iter().all(|r| r.exact.is_empty() && r.estimated.is_empty()));
        assert!(rep.matches && rep.inclusion);
    }

    #[test]
    fn c0_formula() {
        let rho = 1e3;
        assert!((estimate_c0(0.01, rho) - 4.0 * 10.0 / rho.ln()).abs() < 1e-12);
        assert!((region_threshold(2.0, rho) - 2.0 * rho.ln() / rho).abs() < 1e-15);
    }
}
