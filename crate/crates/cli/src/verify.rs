//! Property suites run end to end against the configured system and random
//! monotone instances. Failures are data: every suite yields a [`Check`].

use std::time::Instant;

use anyhow::{bail, ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use qvi_core::regularize::{SweepMap, Sweeper};
use qvi_core::{
    active_set_enumerate, apply_q, apply_q_rho, hjb_limit_solve, iterate_to_fixed_point,
    penalty_error_bound, phi_minimize, pseudo_time_solve, qvi_residual, random_affine_system,
    solve_penalized, solve_root, strict_supersolution, zero_cost_gap_bound, Costs, ErrorConstants,
    Field, MonotoneSystem, NewtonConfig, PenalizedProblem, Penalty,
};

use crate::config::ExperimentConfig;
use crate::experiment::Experiment;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub passed: bool,
    /// Probes evaluated.
    pub cases: usize,
    /// Largest violation margin seen (suite specific; `<= 0` is good).
    pub worst: f64,
    pub detail: String,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifySummary {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Randomized instances for the oracle comparison.
    pub instances: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20_160_401,
            instances: 50,
        }
    }
}

/// Outcome of one suite before timing is attached.
struct Outcome {
    cases: usize,
    worst: f64,
    detail: String,
}

type Suite = fn(&Ctx) -> Result<Outcome>;

pub const SUITES: [&str; 14] = [
    "monotonicity",
    "translation",
    "a-priori-bound",
    "comparison",
    "monotone-in-rho",
    "oracle-agreement",
    "q-rho-lipschitz",
    "q-monotone-sweeps",
    "contraction-bound",
    "strict-supersolution",
    "penalty-bound-scan",
    "zero-cost-gap",
    "regime-gap-halving",
    "penalty-laws",
];

const RUNNERS: [Suite; 14] = [
    monotonicity,
    translation,
    a_priori,
    comparison,
    monotone_in_rho,
    oracle_agreement,
    q_rho_lipschitz,
    q_monotone_sweeps,
    contraction_bound,
    strict_super,
    penalty_bound_scan,
    zero_cost_gap,
    regime_gap_halving,
    penalty_laws,
];

struct Ctx {
    exp: Experiment,
    opts: VerifyOptions,
}

impl Ctx {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.opts.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    fn positive_costs(&self) -> Vec<f64> {
        self.exp
            .config
            .cost_list
            .iter()
            .copied()
            .filter(|c| *c > 0.0)
            .collect()
    }

    fn first_cost(&self) -> Result<f64> {
        match self.positive_costs().first() {
            Some(&c) => Ok(c),
            None => bail!("cost_list has no positive cost"),
        }
    }

    fn penalized(&self, c: f64, rho: f64) -> Result<Field> {
        Ok(self.exp.solve(c, rho)?.0)
    }
}

/// Runs every suite; suites run concurrently and are reported in a fixed
/// order.
pub fn run_verify(config: &ExperimentConfig, opts: VerifyOptions) -> Result<VerifySummary> {
    let ctx = Ctx {
        exp: Experiment::new(config.clone())?,
        opts,
    };
    let checks: Vec<Check> = SUITES
        .par_iter()
        .zip(RUNNERS.par_iter())
        .map(|(name, run)| {
            let start = Instant::now();
            let res = run(&ctx);
            let runtime_s = start.elapsed().as_secs_f64();
            match res {
                Ok(o) => Check {
                    suite: name.to_string(),
                    passed: o.worst <= 0.0,
                    cases: o.cases,
                    worst: o.worst,
                    detail: o.detail,
                    runtime_s,
                },
                Err(e) => Check {
                    suite: name.to_string(),
                    passed: false,
                    cases: 0,
                    worst: f64::INFINITY,
                    detail: format!("{e:#}"),
                    runtime_s,
                },
            }
        })
        .collect();
    for c in checks.iter().filter(|c| !c.passed) {
        log::warn!("suite {} failed: {}", c.suite, c.detail);
    }
    Ok(VerifySummary {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn random_field(rng: &mut ChaCha8Rng, d: usize, n: usize, scale: f64) -> Field {
    Field::from_fn(d, n, |_, _| rng.gen_range(-scale..scale))
}

fn root_of<F: MonotoneSystem<f64>>(sys: &F) -> Result<Field> {
    let (d, n) = sys.dims();
    Ok(solve_root(sys, &Field::zeros(d, n), &NewtonConfig::default())?.0)
}

/// Monotonicity margin at the largest entry of `u - v` (positive = broken).
fn argmax_margin<F: MonotoneSystem<f64>>(sys: &F, u: &Field, v: &Field) -> f64 {
    let diff = u.sub(v);
    let (k, top) = diff
        .as_slice()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    if top < 0.0 {
        return f64::NEG_INFINITY;
    }
    let fu = sys.evaluate(u).as_slice()[k];
    let fv = sys.evaluate(v).as_slice()[k];
    let slack = 1e-12 * (1.0 + fu.abs() + fv.abs());
    sys.gamma() * top - (fu - fv) - slack
}

fn monotonicity(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(1);
    let (d, n) = ctx.exp.system.dims();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for _ in 0..100 {
        let scale = rng.gen_range(0.1..50.0);
        let u = random_field(&mut rng, d, n, scale);
        let v = random_field(&mut rng, d, n, scale);
        worst = worst.max(argmax_margin(&ctx.exp.system, &u, &v));
        worst = worst.max(argmax_margin(&ctx.exp.system, &v, &u));
        cases += 2;
    }
    for _ in 0..100 {
        let (d, n) = (rng.gen_range(2..4), rng.gen_range(1..5));
        let sys = random_affine_system(d, n, 0.5, rng.gen())?;
        let u = random_field(&mut rng, d, n, 5.0);
        let v = random_field(&mut rng, d, n, 5.0);
        worst = worst.max(argmax_margin(&sys, &u, &v));
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "gamma (u-v) - (F(u)-F(v)) at argmax of u-v".into(),
    })
}

fn translation(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(2);
    let sys = &ctx.exp.system;
    let (d, n) = sys.dims();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for _ in 0..50 {
        let u = random_field(&mut rng, d, n, 20.0);
        let shift = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
        let fu = sys.evaluate(&u);
        let fs = sys.evaluate(&u.add_scalar(shift));
        for (a, b) in fs.as_slice().iter().zip(fu.as_slice()) {
            let slack = 1e-12 * (1.0 + a.abs() + b.abs());
            worst = worst.max(sys.gamma() * shift - (a - b) - slack);
        }
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "F(u + k) - F(u) >= gamma k".into(),
    })
}

fn a_priori(ctx: &Ctx) -> Result<Outcome> {
    let sys = &ctx.exp.system;
    let bound = sys.a_priori_bound();
    let rhos = &ctx.exp.config.rho_list;
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for &c in &ctx.exp.config.cost_list {
        for &rho in [rhos[0], rhos[rhos.len() - 1]].iter() {
            let u = ctx.penalized(c, rho)?;
            worst = worst.max(u.sup_norm() - bound - 1e-8 * (1.0 + bound));
            cases += 1;
        }
    }
    let mut rng = ctx.rng(3);
    for _ in 0..30 {
        let (d, n) = (rng.gen_range(2..4), rng.gen_range(1..5));
        let s = random_affine_system(d, n, rng.gen_range(0.2..2.0), rng.gen())?;
        let c = [0.0, 0.1, 1.0][rng.gen_range(0..3)];
        let rho = [0.0, 1.0, 1e3][rng.gen_range(0..3)];
        let prob = PenalizedProblem::linear(&s, Costs::uniform(d, c)?, rho)?;
        let (u, _) = solve_penalized(&prob, &root_of(&s)?, &NewtonConfig::default())?;
        worst = worst.max(u.sup_norm() - s.a_priori_bound() - 1e-8);
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: format!("||u|| <= ||F(0)||/gamma = {bound:.6}"),
    })
}

fn comparison(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(4);
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for _ in 0..40 {
        let sys = random_affine_system(2, 3, 1.0, rng.gen())?;
        let c = [0.0, 0.1, 1.0][rng.gen_range(0..3)];
        let rho = [0.0, 1.0, 1e3][rng.gen_range(0..3)];
        let prob = PenalizedProblem::linear(&sys, Costs::uniform(2, c)?, rho)?;
        let (u, _) = solve_penalized(&prob, &root_of(&sys)?, &NewtonConfig::default())?;
        // Push a random field down until it is a subsolution, and lift the
        // solution into a supersolution.
        let w = random_field(&mut rng, 2, 3, 5.0);
        let excess = prob.residual(&w)?.as_slice().iter().fold(0.0f64, |m, v| m.max(*v));
        let sub = w.add_scalar(-excess / sys.gamma());
        let sup = u.add_scalar(0.5);
        worst = worst.max(sub.max_diff(&u) - 1e-8);
        worst = worst.max(u.max_diff(&sup) - 1e-8);
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "subsolution <= u <= supersolution".into(),
    })
}

fn monotone_in_rho(ctx: &Ctx) -> Result<Outcome> {
    let rhos = &ctx.exp.config.rho_list;
    let costs = ctx.positive_costs();
    let pick: Vec<f64> = [costs.first(), costs.last()].into_iter().flatten().copied().collect();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    let mut by_cost = Vec::new();
    for &c in &pick {
        let sols = rhos
            .iter()
            .map(|&r| ctx.penalized(c, r))
            .collect::<Result<Vec<_>>>()?;
        for w in sols.windows(2) {
            worst = worst.max(w[0].max_diff(&w[1]) - 1e-8);
            cases += 1;
        }
        by_cost.push(sols);
    }
    // Smaller costs give larger solutions.
    if by_cost.len() == 2 {
        for (a, b) in by_cost[0].iter().zip(&by_cost[1]) {
            worst = worst.max(a.max_diff(b) - 1e-8);
            cases += 1;
        }
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "u^{c,rho} <= u^{c,rho'} for rho < rho', and decreasing in c".into(),
    })
}

/// Newton, pseudo-time marching and active-set enumeration on `count`
/// random instances with `d <= 3`, `N <= 4`. Returns the largest pairwise
/// sup-distance.
pub fn oracle_disagreement(seed: u64, count: usize) -> Result<f64> {
    let worst = (0..count)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let d = rng.gen_range(2..=3);
            // Enumeration needs (d - 1) d N <= 16.
            let n = if d == 2 { rng.gen_range(1..=4) } else { rng.gen_range(1..=2) };
            let c = [0.0, 0.05, 0.3, 1.0][rng.gen_range(0..4)];
            let rho = [0.0, 1.0, 10.0, 100.0, 1e3][rng.gen_range(0..5)];
            let sys = random_affine_system(d, n, 1.0, rng.gen())?;
            let prob = PenalizedProblem::linear(&sys, Costs::uniform(d, c)?, rho)?;
            let (newton, _) = solve_penalized(&prob, &root_of(&sys)?, &NewtonConfig::default())?;
            let (marched, _) = pseudo_time_solve(&prob, None, 1e-10, 50_000_000)?;
            let exact = active_set_enumerate(&prob)?;
            Ok(newton
                .sup_dist(&marched)
                .max(newton.sup_dist(&exact))
                .max(marched.sup_dist(&exact)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

fn oracle_agreement(ctx: &Ctx) -> Result<Outcome> {
    let worst = oracle_disagreement(ctx.opts.seed, ctx.opts.instances)?;
    Ok(Outcome {
        cases: ctx.opts.instances,
        worst: worst - 1e-6,
        detail: format!("largest pairwise distance {worst:.3e} (limit 1e-6)"),
    })
}

fn q_rho_lipschitz(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(6);
    let cfg = NewtonConfig::default();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for _ in 0..40 {
        let rho = [1.0, 10.0, 1e3][rng.gen_range(0..3)];
        let sys = random_affine_system(2, 4, 0.5, rng.gen())?;
        let prob = PenalizedProblem::linear(&sys, Costs::uniform(2, 0.1)?, rho)?;
        let u = random_field(&mut rng, 2, 4, 3.0);
        let v = random_field(&mut rng, 2, 4, 3.0);
        let qu = apply_q_rho(&u, &prob, &cfg)?;
        let qv = apply_q_rho(&v, &prob, &cfg)?;
        worst = worst.max(qu.sup_dist(&qv) - u.sup_dist(&v) - 1e-8);
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "||Q_rho u - Q_rho v|| <= ||u - v||".into(),
    })
}

fn q_monotone_sweeps(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(7);
    let cfg = NewtonConfig::default();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for _ in 0..40 {
        let sys = random_affine_system(3, 2, 0.5, rng.gen())?;
        let costs = Costs::uniform(3, 0.3)?;
        let v = random_field(&mut rng, 3, 2, 2.0);
        let lift = rng.gen_range(0.0..2.0);
        let u = v.zip_map(&random_field(&mut rng, 3, 2, 1.0), |a, b| a + b.abs() * lift);
        let (qu, qv) = (apply_q(&u, &sys, &costs, &cfg)?, apply_q(&v, &sys, &costs, &cfg)?);
        worst = worst.max(qv.max_diff(&qu) - 1e-8);
        cases += 1;
    }
    // Sweeps from the root of F increase.
    let c = ctx.first_cost()?;
    let (d, _) = ctx.exp.system.dims();
    let costs = Costs::uniform(d, c)?;
    let sweeper = Sweeper::new(&ctx.exp.system, &costs);
    let run = iterate_to_fixed_point(&sweeper, SweepMap::Q, &ctx.exp.root, 10, 0.0)?;
    for w in run.iterates.windows(2) {
        worst = worst.max(w[0].max_diff(&w[1]) - 1e-8);
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "v <= u implies Qv <= Qu; sweeps from the root increase".into(),
    })
}

fn contraction_bound(ctx: &Ctx) -> Result<Outcome> {
    let sys = &ctx.exp.system;
    let c = ctx.first_cost()?;
    let costs = Costs::uniform(sys.regimes(), c)?;
    let k = ErrorConstants::iterated_stopping(sys, &costs, None)?;
    // One-sided reference: u^rho <= u <= u^rho + 2 ||u^{2 rho} - u^rho||.
    let lo = ctx.penalized(c, 1e6)?;
    let margin = 2.0 * ctx.penalized(c, 2e6)?.sup_dist(&lo);
    let hi = lo.add_scalar(margin);
    let sweeper = Sweeper::new(sys, &costs);
    let run = iterate_to_fixed_point(&sweeper, SweepMap::Q, &ctx.exp.root, 30, 0.0)?;
    let mut worst = f64::NEG_INFINITY;
    for (n, u) in run.iterates.iter().enumerate() {
        worst = worst.max(hi.max_diff(u) - k.sweep_bound(n) - 1e-6);
        worst = worst.max(u.max_diff(&hi) - 1e-8);
    }
    Ok(Outcome {
        cases: run.iterates.len(),
        worst,
        detail: format!("c = {c}, mu = {:.4e}, sweeps 0..=30", k.mu),
    })
}

fn strict_super(ctx: &Ctx) -> Result<Outcome> {
    let sys = &ctx.exp.system;
    let c = ctx.first_cost()?;
    let costs = Costs::uniform(sys.regimes(), c)?;
    let kappa = 0.5 * c;
    let cfg = NewtonConfig::default().with_residual_tol(1e-6);
    let w = strict_supersolution(sys, &costs, kappa, 1e6, &cfg)?;
    let g = qvi_residual(&w, sys, &costs)?;
    let off = g
        .as_slice()
        .iter()
        .map(|v| (v - kappa).abs())
        .fold(0.0, f64::max);
    let norm_excess = w.sup_norm() - (sys.norm_f0() + kappa) / sys.gamma();
    Ok(Outcome {
        cases: g.len(),
        worst: (off - 1e-2 * kappa).max(norm_excess),
        detail: format!("kappa = {kappa}, max |G(w) - kappa| = {off:.3e}"),
    })
}

fn penalty_bound_scan(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(10);
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    // Closed-form minimum against a long independent scan.
    for _ in 0..50 {
        let nu = 10f64.powf(rng.gen_range(-1.0..4.0));
        let a = rng.gen_range(0.5..0.999);
        let b = 10f64.powf(rng.gen_range(-6.0..0.0));
        let p = phi_minimize(nu, a, b)?;
        let scan = (0..=(20.0 * p.crossover) as u64 + 100)
            .map(|n| nu * a.powi(n as i32) + b * n as f64)
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((p.m - scan).abs() - 1e-12 * scan);
        worst = worst.max(p.m - p.bound * (1.0 + 1e-12));
        cases += 1;
    }
    // The bound dominates the observed penalty error on the configured system.
    let sys = &ctx.exp.system;
    let c = ctx.first_cost()?;
    let k = ErrorConstants::iterated_stopping(sys, &Costs::uniform(sys.regimes(), c)?, None)?;
    for &rho in &ctx.exp.config.rho_list {
        let u1 = ctx.penalized(c, rho)?;
        let u2 = ctx.penalized(c, 2.0 * rho)?;
        let observed = 2.0 * u2.sup_dist(&u1);
        worst = worst.max(observed - penalty_error_bound(&k, rho, 1.0, 1.0));
        cases += 1;
    }
    Ok(Outcome {
        cases,
        worst,
        detail: "scan minimum vs closed form; bound >= observed error".into(),
    })
}

fn zero_cost_gap(ctx: &Ctx) -> Result<Outcome> {
    let sys = &ctx.exp.system;
    let d = sys.regimes();
    let rho = ctx.exp.config.rho_list[0];
    let mut costs = ctx.positive_costs();
    costs.sort_by(f64::total_cmp);
    costs.truncate(2);
    ensure!(!costs.is_empty(), "cost_list has no positive cost");
    let u0 = ctx.penalized(0.0, rho)?;
    let mut gaps = Vec::new();
    for &c in &costs {
        let u = ctx.penalized(c, rho)?;
        match zero_cost_gap_bound(&u, &u0, c, rho, d, sys.gamma()) {
            Ok(g) => gaps.push(g),
            Err(e) => {
                return Ok(Outcome {
                    cases: costs.len(),
                    worst: f64::INFINITY,
                    detail: format!("c = {c}: {e}"),
                })
            }
        }
    }
    Ok(Outcome {
        cases: costs.len(),
        worst: -1.0,
        detail: format!("rho = {rho}, gaps {gaps:?} for costs {costs:?}"),
    })
}

fn regime_gap_halving(ctx: &Ctx) -> Result<Outcome> {
    let rhos = &ctx.exp.config.rho_list;
    ensure!(rhos.len() >= 2, "needs at least two penalty parameters");
    let cfg = ctx.exp.newton_at(*rhos.last().expect("non-empty"));
    let sol = hjb_limit_solve(&ctx.exp.system, rhos, &cfg)?;
    let mut worst = f64::NEG_INFINITY;
    let mut ratios = Vec::new();
    for (w, r) in sol.regime_gaps.windows(2).zip(rhos.windows(2)) {
        let ratio = (w[0] / w[1]) * (2.0 / (r[1] / r[0]));
        worst = worst.max((ratio - 2.4).max(1.6 - ratio));
        ratios.push(ratio);
    }
    Ok(Outcome {
        cases: ratios.len(),
        worst,
        detail: format!("gap ratios per doubling {ratios:.3?}"),
    })
}

fn penalty_laws(ctx: &Ctx) -> Result<Outcome> {
    let sys = &ctx.exp.system;
    let reach = 2.0 * sys.norm_f0() / sys.gamma();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for sigma in [0.5, 1.0, 2.0] {
        let p = Penalty::new(sigma);
        let grid: Vec<f64> = (0..1000)
            .map(|k| -reach + 2.0 * reach * k as f64 / 999.0)
            .collect();
        for w in grid.windows(2) {
            worst = worst.max(p.value(w[0]) - p.value(w[1]));
        }
        for &y in &grid {
            if y <= 0.0 {
                worst = worst.max(p.value(y).abs()).max(p.subderivative(y).abs());
            } else {
                worst = worst.max(p.tau() * y.powf(1.0 / sigma) * (1.0 - 1e-15) - p.value(y));
            }
            cases += 1;
        }
    }
    Ok(Outcome {
        cases,
        worst: if worst > 0.0 { worst } else { -1.0 },
        detail: "pi vanishes on y <= 0, is non-decreasing, pi(y) >= tau y^(1/sigma)".into(),
    })
}
