//! Slow reference solvers for the penalized equation.
//!
//! * [`pseudo_time_solve`]: explicit marching `u <- u - delta G^rho(u)`,
//!   valid for every penalty degree.
//! * [`active_set_enumerate`]: exact solution of the piecewise-linear
//!   problem on tiny instances by trying every on/off pattern of the
//!   penalty terms.
//! * [`random_affine_system`]: random monotone test instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::residual::PenalizedProblem;
use crate::scalar::Real;
use crate::sparse::{linear_solve, SparseMatrix};
use crate::system::{AffineSystem, MonotoneSystem};

/// Consecutive residual increases tolerated before the step is halved.
pub const GROWTH_PATIENCE: usize = 100;
/// Step halvings before the march is declared divergent.
pub const MAX_HALVINGS: usize = 10;
/// Largest number of penalty terms `(d - 1) d N` for enumeration.
pub const MAX_PENALTY_TERMS: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct MarchReport {
    pub steps: usize,
    pub halvings: usize,
    pub step: f64,
    pub final_residual: f64,
}

fn max_abs_diagonal<S: Real>(op: &SparseMatrix<S>) -> S {
    op.diagonal().iter().fold(S::zero(), |m, v| m.max(v.abs()))
}

/// Largest penalty subderivative at `u`.
fn max_subderivative<S: Real, F: MonotoneSystem<S>>(
    prob: &PenalizedProblem<S, F>,
    u: &RegimeField<S>,
) -> S {
    let (d, n) = u.dims();
    let mut best = S::zero();
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            let c = prob.costs.cost(i, j);
            for l in 0..n {
                let h = prob.penalty.subderivative(u.get(j, l) - c - u.get(i, l));
                if h.is_finite() {
                    best = best.max(h);
                }
            }
        }
    }
    best
}

/// Marches `u <- u - delta G^rho(u)` from zero until `||G^rho(u)|| <= tol`.
///
/// `step` overrides the initial `0.9 / (max |diag| + rho (d - 1))`. The step
/// also shrinks whenever the penalty subderivative met along the path would
/// break the contraction, and is halved after [`GROWTH_PATIENCE`] consecutive
/// residual increases.
pub fn pseudo_time_solve<S: Real, F: MonotoneSystem<S>>(
    prob: &PenalizedProblem<S, F>,
    step: Option<S>,
    tol: S,
    max_steps: usize,
) -> Result<(RegimeField<S>, MarchReport)> {
    let (d, n) = prob.system.dims();
    let mut u = RegimeField::zeros(d, n);
    let diag = max_abs_diagonal(&prob.system.slant(&u));
    let coupling = prob.rho * S::lit((d - 1) as f64);
    let safe_step = |sub: S| S::lit(0.9) / (diag + coupling * sub.max(S::one()));
    let mut delta = step.unwrap_or_else(|| safe_step(S::one()));
    if !(delta > S::zero()) {
        return Err(QviError::InvalidParameter(format!("step must be positive, got {delta}")));
    }

    let mut g = prob.residual(&u)?;
    let mut res = g.sup_norm();
    let mut growth = 0;
    let mut halvings = 0;
    let mut steps = 0;
    while res > tol {
        if steps == max_steps {
            return Err(QviError::MaxStepsExceeded {
                steps,
                residual: res.as_f64(),
            });
        }
        if !prob.penalty.is_linear() {
            delta = delta.min(safe_step(max_subderivative(prob, &u)));
        }
        let next = u.zip_map(&g, |a, b| a - delta * b);
        let g_next = prob.residual(&next)?;
        let res_next = g_next.sup_norm();
        steps += 1;
        if !res_next.is_finite() {
            growth = GROWTH_PATIENCE;
        } else {
            growth = if res_next > res { growth + 1 } else { 0 };
            u = next;
            g = g_next;
            res = res_next;
        }
        if growth >= GROWTH_PATIENCE {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(QviError::DivergenceDetected { halvings: MAX_HALVINGS });
            }
            delta = delta / S::lit(2.0);
            growth = 0;
        }
    }
    Ok((
        u,
        MarchReport {
            steps,
            halvings,
            step: delta.as_f64(),
            final_residual: res.as_f64(),
        },
    ))
}

/// Penalty terms `(i, j, l)` in pattern-bit order.
fn penalty_terms(d: usize, n: usize) -> Vec<(usize, usize, usize)> {
    let mut terms = Vec::with_capacity((d - 1) * d * n);
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            for l in 0..n {
                terms.push((i, j, l));
            }
        }
    }
    terms
}

/// Exact solve of `G^rho(u) = 0` for affine `F` and the linear penalty by
/// enumerating the on/off patterns of all `(d - 1) d N <= 16` penalty
/// terms. Patterns whose solution reproduces its own signs are consistent;
/// several consistent patterns are accepted when they share one solution
/// (a degenerate tie at a kink).
pub fn active_set_enumerate<S: Real, F: MonotoneSystem<S>>(
    prob: &PenalizedProblem<S, F>,
) -> Result<RegimeField<S>> {
    if !prob.penalty.is_linear() {
        return Err(QviError::UnsupportedPenaltyDegree(prob.penalty.sigma().as_f64()));
    }
    let (d, n) = prob.system.dims();
    let terms = penalty_terms(d, n);
    if terms.len() > MAX_PENALTY_TERMS {
        return Err(QviError::InvalidParameter(format!(
            "{} penalty terms exceed the enumeration cap of {MAX_PENALTY_TERMS}",
            terms.len()
        )));
    }
    let zero = RegimeField::zeros(d, n);
    let base = prob.system.slant(&zero);
    // F(u) = A u - b with b = -F(0).
    let b: Vec<S> = prob.system.evaluate(&zero).as_slice().iter().map(|v| -*v).collect();
    let rho = prob.rho;
    let size = d * n;

    let mut found: Vec<(u64, RegimeField<S>)> = Vec::new();
    let patterns = 1u64 << terms.len();
    for pattern in 0..patterns {
        let mut trips: Vec<(usize, usize, S)> = base.triplets().collect();
        let mut rhs = b.clone();
        for (bit, &(i, j, l)) in terms.iter().enumerate() {
            if pattern >> bit & 1 == 1 {
                // -rho (u^j - c - u^i) moved to the left-hand side.
                let row = i * n + l;
                trips.push((row, row, rho));
                trips.push((row, j * n + l, -rho));
                rhs[row] = rhs[row] - rho * prob.costs.cost(i, j);
            }
        }
        let op = SparseMatrix::from_triplets(size, size, trips);
        let Ok(x) = linear_solve(&op, &rhs) else {
            continue;
        };
        let u = RegimeField::from_flat(d, n, x)?;
        let scale = S::lit(1e-10) * (S::one() + u.sup_norm());
        let consistent = terms.iter().enumerate().all(|(bit, &(i, j, l))| {
            let y = u.get(j, l) - prob.costs.cost(i, j) - u.get(i, l);
            if pattern >> bit & 1 == 1 {
                y >= -scale
            } else {
                y <= scale
            }
        });
        if consistent {
            found.push((pattern, u));
        }
    }

    let Some((_, first)) = found.first() else {
        return Err(QviError::NoConsistentPattern {
            patterns: patterns as usize,
        });
    };
    let agree = S::lit(1e-8) * (S::one() + first.sup_norm());
    if found.iter().any(|(_, u)| u.sup_dist(first) > agree) {
        return Err(QviError::MultiplePatterns {
            patterns: found.iter().map(|(p, _)| *p).collect(),
        });
    }
    let solution = first.clone();
    // A non-affine F would surface here.
    let res = prob.residual(&solution)?.sup_norm();
    if res > S::lit(1e-8) * (S::one() + rho) * (S::one() + solution.sup_norm()) {
        return Err(QviError::InvalidParameter(format!(
            "enumerated solution leaves residual {res:e}; is F affine?"
        )));
    }
    Ok(solution)
}

/// A random monotone affine system: a Z-matrix with unit-order entries whose
/// row sums are at least `gamma`, coupling neighbouring nodes within a
/// regime and, sparsely, across regimes. The returned `gamma` is the
/// smallest row sum.
pub fn random_affine_system(
    regimes: usize,
    nodes: usize,
    gamma: f64,
    seed: u64,
) -> Result<AffineSystem<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = regimes * nodes;
    let mut trips = Vec::new();
    for r in 0..size {
        let mut off = 0.0;
        for c in 0..size {
            let (ri, rl) = (r / nodes, r % nodes);
            let (ci, cl) = (c / nodes, c % nodes);
            let neighbour = ri == ci && rl.abs_diff(cl) == 1;
            let cross = ri != ci && rl == cl && rng.gen_bool(0.3);
            if c != r && (neighbour || cross) {
                let v = rng.gen_range(0.0..1.0);
                off += v;
                trips.push((r, c, -v));
            }
        }
        trips.push((r, r, off + gamma + rng.gen_range(0.0..1.0)));
    }
    let matrix = SparseMatrix::from_triplets(size, size, trips);
    let g = AffineSystem::z_matrix_gamma(&matrix).ok_or_else(|| {
        QviError::InvalidParameter("random matrix is not a monotone Z-matrix".into())
    })?;
    let rhs = (0..size).map(|_| rng.gen_range(-2.0..2.0)).collect();
    AffineSystem::new(regimes, nodes, matrix, rhs, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::SwitchingCosts;
    use crate::newton::{solve_penalized, solve_root, NewtonConfig};
    use crate::penalty::PenaltyFunction;

    fn hand_system() -> AffineSystem<f64> {
        AffineSystem::new(2, 1, SparseMatrix::identity(2), vec![0.0, 2.0], 1.0).unwrap()
    }

    #[test]
    fn march_hand_example() {
        let sys = hand_system();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 0.0).unwrap(), 1.0).unwrap();
        let (u, rep) = pseudo_time_solve(&prob, None, 1e-9, 1_000_000).unwrap();
        assert!((u.get(0, 0) - 1.0).abs() < 1e-8);
        assert!((u.get(1, 0) - 2.0).abs() < 1e-8);
        assert_eq!(rep.halvings, 0);
    }

    #[test]
    fn march_without_penalty_finds_root() {
        let sys = random_affine_system(2, 3, 0.5, 7).unwrap();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 0.1).unwrap(), 0.0).unwrap();
        let (u, _) = pseudo_time_solve(&prob, None, 1e-11, 1_000_000).unwrap();
        let (root, _) = solve_root(&sys, &RegimeField::zeros(2, 3), &NewtonConfig::default()).unwrap();
        assert!(u.sup_dist(&root) < 1e-9);
    }

    #[test]
    fn march_step_limit() {
        let sys = hand_system();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 0.0).unwrap(), 1.0).unwrap();
        assert!(matches!(
            pseudo_time_solve(&prob, None, 1e-9, 3),
            Err(QviError::MaxStepsExceeded { steps: 3, .. })
        ));
    }

    #[test]
    fn march_too_large_step_diverges() {
        let sys = hand_system();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 0.0).unwrap(), 1.0).unwrap();
        // delta = 1e6 overshoots; eleven halvings are not enough to recover.
        assert!(matches!(
            pseudo_time_solve(&prob, Some(1e6), 1e-9, 10_000_000),
            Err(QviError::DivergenceDetected { .. })
        ));
    }

    #[test]
    fn march_handles_nonlinear_penalty() {
        let sys = hand_system();
        for sigma in [0.5, 2.0] {
            let prob = PenalizedProblem::new(
                &sys,
                SwitchingCosts::uniform(2, 0.0).unwrap(),
                1.0,
                PenaltyFunction::new(sigma),
            )
            .unwrap();
            let (u, _) = pseudo_time_solve(&prob, None, 1e-9, 10_000_000).unwrap();
            assert!(prob.residual(&u).unwrap().sup_norm() <= 1e-9);
        }
    }

    #[test]
    fn enumeration_hand_example() {
        let sys = hand_system();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 0.0).unwrap(), 1.0).unwrap();
        let u = active_set_enumerate(&prob).unwrap();
        assert!((u.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((u.get(1, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_huge_cost_gives_root() {
        let sys = random_affine_system(2, 2, 1.0, 3).unwrap();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 10.0).unwrap(), 5.0).unwrap();
        let u = active_set_enumerate(&prob).unwrap();
        let (root, _) = solve_root(&sys, &RegimeField::zeros(2, 2), &NewtonConfig::default()).unwrap();
        assert!(u.sup_dist(&root) < 1e-12);
    }

    #[test]
    fn enumeration_agrees_with_march_and_newton() {
        for seed in 0..5 {
            let sys = random_affine_system(2, 2, 1.0, seed).unwrap();
            let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(2, 0.1).unwrap(), 10.0).unwrap();
            let exact = active_set_enumerate(&prob).unwrap();
            let (marched, _) = pseudo_time_solve(&prob, None, 1e-11, 10_000_000).unwrap();
            let (newton, _) = solve_penalized(&prob, &RegimeField::zeros(2, 2), &NewtonConfig::default()).unwrap();
            assert!(exact.sup_dist(&marched) < 1e-8, "seed {seed}");
            assert!(exact.sup_dist(&newton) < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn enumeration_cap() {
        let sys = random_affine_system(3, 4, 1.0, 0).unwrap();
        let prob = PenalizedProblem::linear(&sys, SwitchingCosts::uniform(3, 0.1).unwrap(), 1.0).unwrap();
        assert!(active_set_enumerate(&prob).is_err());
    }

    #[test]
    fn random_systems_are_monotone_z_matrices() {
        for seed in 0..20 {
            let sys = random_affine_system(3, 4, 0.5, seed).unwrap();
            assert!(sys.gamma() >= 0.5);
        }
    }
}
