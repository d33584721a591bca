use anyhow::{Context, Result};

use qvi_core::regions::residual_tol_for;
use qvi_core::{
    assemble, hjb_limit_solve, solve_penalized, solve_root, Affine, Costs, Field, MonotoneSystem,
    NewtonConfig, PenalizedProblem, SolveReport,
};

use crate::config::ExperimentConfig;

/// An assembled system together with the root of `F`, the starting point
/// of every penalized solve.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: Affine,
    pub root: Field,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let system: Affine = assemble(&config.pde).context("assembling the switching system")?;
        let (d, n) = system.dims();
        let (root, _) = solve_root(&system, &Field::zeros(d, n), &config.newton)
            .context("solving F(u) = 0 for the initial guess")?;
        Ok(Self {
            config,
            system,
            root,
        })
    }

    pub fn regimes(&self) -> usize {
        self.system.regimes()
    }

    /// Newton settings for a solve at `rho`.
    pub fn newton_at(&self, rho: f64) -> NewtonConfig {
        let bound = self.system.a_priori_bound();
        self.config
            .newton
            .with_residual_tol(residual_tol_for(&self.config.newton, rho, bound))
    }

    /// `u^{c,rho}`; the zero-cost problem goes through the limit path.
    pub fn solve(&self, c: f64, rho: f64) -> Result<(Field, SolveReport)> {
        let cfg = self.newton_at(rho);
        if c == 0.0 {
            let mut sol = hjb_limit_solve(&self.system, &[rho], &cfg)?;
            let report = sol.reports.pop().expect("one rho");
            let u = sol.solutions.pop().expect("one rho");
            return Ok((u, report));
        }
        let costs = Costs::uniform(self.regimes(), c)?;
        let prob = PenalizedProblem::linear(&self.system, costs, rho)?;
        Ok(solve_penalized(&prob, &self.root, &cfg)?)
    }
}
