//! Reference values of the two- and three-regime switching problems.

use qvi_core::{
    assemble, hjb_limit_solve, solve_penalized, solve_root, Affine, Costs, Field, NewtonConfig,
    PdeParams, PenalizedProblem,
};

const RHO1: [f64; 6] = [1e3, 2e3, 4e3, 8e3, 16e3, 32e3];
const COST1: [f64; 7] = [1.0 / 2.0, 1.0 / 8.0, 1.0 / 32.0, 1.0 / 128.0, 1.0 / 512.0, 1.0 / 2048.0, 0.0];
const VALUE1: [[f64; 6]; 7] = [
    [3.37521, 3.38261, 3.38633, 3.38819, 3.38913, 3.38959],
    [5.26287, 5.27999, 5.28860, 5.29292, 5.29508, 5.29617],
    [5.98193, 6.01704, 6.03478, 6.04370, 6.04817, 6.05041],
    [6.23801, 6.30708, 6.34232, 6.36011, 6.36906, 6.37354],
    [6.35128, 6.42179, 6.45776, 6.47593, 6.48506, 6.48964],
    [6.37959, 6.45047, 6.48662, 6.50488, 6.51406, 6.51866],
    [6.38903, 6.46003, 6.49624, 6.51454, 6.52373, 6.52834],
];
const ITER1: [[usize; 6]; 7] = [
    [5, 6, 6, 6, 6, 6],
    [7, 5, 5, 5, 5, 5],
    [6, 6, 5, 5, 5, 5],
    [5, 5, 4, 4, 4, 4],
    [5, 5, 4, 4, 4, 4],
    [4, 4, 4, 4, 4, 4],
    [4, 4, 3, 3, 3, 3],
];

const RHO2: [f64; 6] = [4e3, 8e3, 16e3, 32e3, 64e3, 128e3];
const COST2: [f64; 8] = [
    1.0 / 4.0,
    1.0 / 16.0,
    1.0 / 64.0,
    1.0 / 256.0,
    1.0 / 1024.0,
    1.0 / 4096.0,
    1.0 / 16384.0,
    0.0,
];
const VALUE2: [[f64; 6]; 8] = [
    [6.849917, 6.849942, 6.849954, 6.849960, 6.849962, 6.849964],
    [7.405239, 7.405507, 7.405641, 7.405708, 7.405742, 7.405758],
    [7.791271, 7.792091, 7.792499, 7.792703, 7.792805, 7.792856],
    [8.009477, 8.011330, 8.012258, 8.012722, 8.012955, 8.013071],
    [8.108554, 8.112341, 8.114262, 8.115229, 8.115715, 8.115958],
    [8.135298, 8.138958, 8.141012, 8.142047, 8.142567, 8.142828],
    [8.143553, 8.146389, 8.147826, 8.148752, 8.149280, 8.149545],
    [8.146313, 8.149164, 8.150603, 8.151326, 8.151688, 8.151869],
];

const ITER2: [[usize; 6]; 8] = [
    [12, 12, 12, 12, 12, 12],
    [12, 12, 12, 12, 12, 12],
    [13, 13, 13, 13, 13, 13],
    [14, 14, 14, 14, 14, 14],
    [15, 15, 14, 15, 15, 15],
    [14, 14, 14, 14, 14, 14],
    [12, 12, 14, 14, 14, 14],
    [12, 12, 12, 12, 12, 11],
];

fn solve(sys: &Affine, root: &Field, c: f64, rho: f64) -> (Field, usize) {
    let costs = Costs::uniform(sys_regimes(sys), c).unwrap();
    let prob = PenalizedProblem::linear(sys, costs, rho).unwrap();
    let (u, rep) = solve_penalized(&prob, root, &NewtonConfig::default()).unwrap();
    (u, rep.iterations)
}

fn sys_regimes(sys: &Affine) -> usize {
    use qvi_core::MonotoneSystem;
    sys.regimes()
}

fn setup(p: &PdeParams) -> (Affine, Field) {
    let sys = assemble::<f64>(p).unwrap();
    let (root, _) = solve_root(&sys, &Field::zeros(p.regimes, p.nodes), &NewtonConfig::default()).unwrap();
    (sys, root)
}

#[test]
fn two_regime_values_and_iterations() {
    let (sys, root) = setup(&PdeParams::two_regime());
    for (ci, &c) in COST1.iter().enumerate() {
        for (ri, &rho) in RHO1.iter().enumerate() {
            let (u, it) = solve(&sys, &root, c, rho);
            let v = u.get(0, 25);
            assert!(
                (v - VALUE1[ci][ri]).abs() <= 6e-6,
                "c={c} rho={rho}: {v} vs {}",
                VALUE1[ci][ri]
            );
            assert!(it <= 2 * ITER1[ci][ri] && 2 * it >= ITER1[ci][ri], "c={c} rho={rho}: {it} iterations");
        }
    }
}

#[test]
fn three_regime_values() {
    let (sys, root) = setup(&PdeParams::three_regime());
    for (ci, &c) in COST2.iter().enumerate() {
        for (ri, &rho) in RHO2.iter().enumerate() {
            let (u, it) = solve(&sys, &root, c, rho);
            let v = u.get(0, 50);
            assert!(it <= 2 * ITER2[ci][ri] && 2 * it >= ITER2[ci][ri], "c={c} rho={rho}: {it} iterations");
            assert!(
                (v - VALUE2[ci][ri]).abs() <= 6e-7,
                "c={c} rho={rho}: {v} vs {}",
                VALUE2[ci][ri]
            );
        }
    }
}

#[test]
fn zero_cost_row_through_limit_path() {
    let (sys, _) = setup(&PdeParams::two_regime());
    let sol = hjb_limit_solve(&sys, &RHO1, &NewtonConfig::default()).unwrap();
    for (k, u) in sol.solutions.iter().enumerate() {
        assert!((u.get(0, 25) - VALUE1[6][k]).abs() <= 6e-6);
    }
    for w in sol.regime_gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=2.4).contains(&ratio), "gap ratio {ratio}");
    }
}
