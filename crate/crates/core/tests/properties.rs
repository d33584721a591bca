use proptest::prelude::*;
use qvi_core::{
    active_set_enumerate, apply_q, apply_q_rho, apply_t, assemble, pseudo_time_solve,
    random_affine_system, solve_penalized, solve_root, Affine, Costs, Field, MonotoneSystem,
    NewtonConfig, PdeParams, PenalizedProblem, Penalty,
};

fn pde_systems() -> Vec<Affine> {
    vec![
        assemble(&PdeParams::two_regime()).unwrap(),
        assemble(&PdeParams::three_regime()).unwrap(),
    ]
}

fn random_field(d: usize, n: usize, seed: u64, scale: f64) -> Field {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(d, n, |_, _| rng.gen_range(-scale..scale))
}

fn root_of<F: MonotoneSystem<f64>>(sys: &F) -> Field {
    let (d, n) = sys.dims();
    solve_root(sys, &Field::zeros(d, n), &NewtonConfig::default()).unwrap().0
}

/// `F_i(u)_l - F_i(v)_l >= gamma (u - v)_{i,l}` at the largest entry of `u - v`.
fn monotone_at_argmax<F: MonotoneSystem<f64>>(sys: &F, u: &Field, v: &Field) -> bool {
    let diff = u.sub(v);
    let (k, &top) = diff
        .as_slice()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if top < 0.0 {
        return true;
    }
    let fu = sys.evaluate(u);
    let fv = sys.evaluate(v);
    let slack = 1e-12 * (1.0 + fu.as_slice()[k].abs() + fv.as_slice()[k].abs());
    fu.as_slice()[k] - fv.as_slice()[k] >= sys.gamma() * top - slack
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pde_systems_are_monotone(seed in any::<u64>(), scale in 0.1f64..50.0) {
        for sys in pde_systems() {
            let (d, n) = sys.dims();
            let u = random_field(d, n, seed, scale);
            let v = random_field(d, n, seed ^ 0x9e37_79b9, scale);
            prop_assert!(monotone_at_argmax(&sys, &u, &v));
            prop_assert!(monotone_at_argmax(&sys, &v, &u));
        }
    }

    #[test]
    fn random_systems_are_monotone(seed in any::<u64>(), d in 2usize..4, n in 1usize..5) {
        let sys = random_affine_system(d, n, 0.5, seed).unwrap();
        let u = random_field(d, n, seed.wrapping_add(1), 5.0);
        let v = random_field(d, n, seed.wrapping_add(2), 5.0);
        prop_assert!(monotone_at_argmax(&sys, &u, &v));
    }

    #[test]
    fn translation_lower_bound(seed in any::<u64>(), k in 0usize..3) {
        let shift = [0.1, 1.0, 10.0][k];
        for sys in pde_systems() {
            let (d, n) = sys.dims();
            let u = random_field(d, n, seed, 20.0);
            let fu = sys.evaluate(&u);
            let fs = sys.evaluate(&u.add_scalar(shift));
            for (a, b) in fs.as_slice().iter().zip(fu.as_slice()) {
                prop_assert!(a - b >= sys.gamma() * shift - 1e-12 * (1.0 + a.abs() + b.abs()));
            }
        }
    }

    #[test]
    fn pde_systems_are_affine_and_lipschitz(seed in any::<u64>()) {
        for sys in pde_systems() {
            let (d, n) = sys.dims();
            let u = random_field(d, n, seed, 10.0);
            let v = random_field(d, n, !seed, 10.0);
            let mid = u.zip_map(&v, |a, b| 0.5 * a + 0.5 * b);
            let lhs = sys.evaluate(&mid);
            let rhs = sys.evaluate(&u).zip_map(&sys.evaluate(&v), |a, b| 0.5 * a + 0.5 * b);
            prop_assert!(lhs.sup_dist(&rhs) <= 1e-12 * (1.0 + lhs.sup_norm()));
            let lip = sys.slant(&u).max_abs_row_sum();
            let df = sys.evaluate(&u).sup_dist(&sys.evaluate(&v));
            prop_assert!(df <= lip * u.sup_dist(&v) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn subsolutions_lie_below(seed in any::<u64>(), rho_k in 0usize..3, c_k in 0usize..3) {
        let (rho, c) = ([0.0, 1.0, 1e3][rho_k], [0.0, 0.1, 1.0][c_k]);
        let sys = random_affine_system(2, 3, 1.0, seed).unwrap();
        let prob = PenalizedProblem::linear(&sys, Costs::uniform(2, c).unwrap(), rho).unwrap();
        let (u, _) = solve_penalized(&prob, &root_of(&sys), &NewtonConfig::default()).unwrap();
        // Push a random field down until it is a subsolution.
        let w = random_field(2, 3, seed ^ 7, 5.0);
        let excess = prob.residual(&w).unwrap().as_slice().iter().fold(0.0f64, |m, v| m.max(*v));
        let sub = w.add_scalar(-excess / sys.gamma());
        prop_assert!(prob.residual(&sub).unwrap().as_slice().iter().all(|v| *v <= 1e-9));
        let sup = u.add_scalar(0.5);
        prop_assert!(prob.residual(&sup).unwrap().as_slice().iter().all(|v| *v >= -1e-9));
        prop_assert!(sub.le_with_tol(&u, 1e-8));
        prop_assert!(u.le_with_tol(&sup, 1e-8));
    }

    #[test]
    fn slant_is_directional_derivative(seed in any::<u64>(), rho in 0.5f64..20.0) {
        let sys = random_affine_system(3, 2, 0.5, seed).unwrap();
        let costs = Costs::uniform(3, 0.2).unwrap();
        let prob = PenalizedProblem::linear(&sys, costs.clone(), rho).unwrap();
        let u = random_field(3, 2, seed ^ 1, 1.0);
        let h = random_field(3, 2, seed ^ 2, 1.0);
        // Skip points within reach of a kink.
        let near_kink = (0..3).any(|i| (0..3).filter(|&j| j != i).any(|j| {
            (0..2).any(|l| (u.get(j, l) - 0.2 - u.get(i, l)).abs() < 1e-4)
        }));
        prop_assume!(!near_kink);
        let t = 1e-7;
        let g0 = prob.residual(&u).unwrap();
        let g1 = prob.residual(&u.zip_map(&h, |a, b| a + t * b)).unwrap();
        let lh = prob.slant(&u).unwrap().mul_vec(h.as_slice());
        let err = g1
            .as_slice()
            .iter()
            .zip(g0.as_slice())
            .zip(&lh)
            .map(|((a, b), l)| (a - b - t * l).abs())
            .fold(0.0, f64::max);
        prop_assert!(err / t <= 1e-6, "err/t = {}", err / t);
    }

    #[test]
    fn q_rho_is_nonexpansive(seed in any::<u64>(), rho_k in 0usize..3) {
        let rho = [1.0, 10.0, 1e3][rho_k];
        let sys = random_affine_system(2, 4, 0.5, seed).unwrap();
        let prob = PenalizedProblem::linear(&sys, Costs::uniform(2, 0.1).unwrap(), rho).unwrap();
        let cfg = NewtonConfig::default();
        let u = random_field(2, 4, seed ^ 3, 3.0);
        let v = random_field(2, 4, seed ^ 4, 3.0);
        let qu = apply_q_rho(&u, &prob, &cfg).unwrap();
        let qv = apply_q_rho(&v, &prob, &cfg).unwrap();
        prop_assert!(qu.sup_dist(&qv) <= u.sup_dist(&v) + 1e-8);
        let bound = sys.a_priori_bound().max(u.sup_norm());
        prop_assert!(qu.sup_norm() <= bound + 1e-8);
    }

    #[test]
    fn q_and_t_are_monotone(seed in any::<u64>(), lift in 0.0f64..2.0) {
        let sys = random_affine_system(3, 2, 0.5, seed).unwrap();
        let costs = Costs::uniform(3, 0.3).unwrap();
        let cfg = NewtonConfig::default();
        let v = random_field(3, 2, seed ^ 5, 2.0);
        let bump = random_field(3, 2, seed ^ 6, 1.0).map(|x| x.abs() * lift);
        let u = v.zip_map(&bump, |a, b| a + b);
        let (qu, qv) = (apply_q(&u, &sys, &costs, &cfg).unwrap(), apply_q(&v, &sys, &costs, &cfg).unwrap());
        prop_assert!(qv.le_with_tol(&qu, 1e-8));
        prop_assert!(qu.sup_norm() <= sys.a_priori_bound().max(u.sup_norm()) + 1e-8);
        let (tu, tv) = (
            apply_t(&u, &sys, &costs, 0.5, &cfg).unwrap(),
            apply_t(&v, &sys, &costs, 0.5, &cfg).unwrap(),
        );
        prop_assert!(tv.le_with_tol(&tu, 1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn oracles_agree_with_newton(
        seed in any::<u64>(),
        d in 2usize..4,
        n_k in 0usize..3,
        rho_k in 0usize..3,
        c_k in 0usize..3,
    ) {
        let n = [1, 2, 4][n_k];
        let (rho, c) = ([0.0, 1.0, 1e3][rho_k], [0.0, 0.1, 1.0][c_k]);
        let sys = random_affine_system(d, n, 1.0, seed).unwrap();
        let prob = PenalizedProblem::linear(&sys, Costs::uniform(d, c).unwrap(), rho).unwrap();
        let (newton, _) = solve_penalized(&prob, &root_of(&sys), &NewtonConfig::default()).unwrap();
        let (marched, _) = pseudo_time_solve(&prob, None, 1e-10, 50_000_000).unwrap();
        prop_assert!(newton.sup_dist(&marched) <= 1e-6);
        if (d - 1) * d * n <= 16 {
            let exact = active_set_enumerate(&prob).unwrap();
            prop_assert!(newton.sup_dist(&exact) <= 1e-6);
            prop_assert!(marched.sup_dist(&exact) <= 1e-6);
        }
    }
}

#[test]
fn penalty_laws_on_a_priori_range() {
    let sys: Affine = assemble(&PdeParams::two_regime()).unwrap();
    let reach = 2.0 * sys.norm_f0() / sys.gamma();
    for sigma in [0.5, 1.0, 2.0] {
        let p = Penalty::new(sigma);
        let grid: Vec<f64> = (0..1000).map(|k| -reach + 2.0 * reach * k as f64 / 999.0).collect();
        for w in grid.windows(2) {
            assert!(p.value(w[0]) <= p.value(w[1]));
        }
        for &y in &grid {
            if y <= 0.0 {
                assert_eq!(p.value(y), 0.0);
                assert_eq!(p.subderivative(y), 0.0);
            } else {
                assert!(p.value(y) >= p.tau() * y.powf(1.0 / sigma) * (1.0 - 1e-15));
                assert!(p.subderivative(y) > 0.0);
            }
        }
    }
}

#[test]
fn pseudo_time_matches_newton_on_reduced_grid() {
    let params = PdeParams::two_regime().with_nodes(20);
    let sys: Affine = assemble(&params).unwrap();
    let prob = PenalizedProblem::linear(&sys, Costs::uniform(2, 0.125).unwrap(), 1e3).unwrap();
    let (newton, _) = solve_penalized(&prob, &root_of(&sys), &NewtonConfig::default()).unwrap();
    let (marched, rep) = pseudo_time_solve(&prob, None, 1e-10, 100_000_000).unwrap();
    assert!(newton.sup_dist(&marched) <= 1e-7, "{} after {} steps", newton.sup_dist(&marched), rep.steps);
}
