//! Constants of the convergence estimates for the regularization and
//! penalty iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::SwitchingCosts;
use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::scalar::Real;
use crate::system::MonotoneSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractionMode {
    IteratedStopping,
    TimeMarching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorConstants {
    pub kappa: f64,
    /// `(2 ||F(0)|| + kappa) / gamma`.
    pub l_kappa: f64,
    pub mu: f64,
    /// Bound on `||F(u)||` over the a-priori ball.
    pub c_sup: f64,
    pub epsilon: Option<f64>,
    pub mode: ContractionMode,
    pub norm_f0: f64,
    pub gamma: f64,
    pub min_cost: f64,
}

/// Random samples used by [`estimate_c`] when no closed form is available.
pub const C_SAMPLES: usize = 1000;
/// Safety factor applied to the sup estimate.
pub const C_SAFETY: f64 = 1.1;

/// `1.1 * sup_{||u|| <= ||F(0)||/gamma} ||F(u)||`: exact when the system
/// provides the sup, otherwise sampled at the two constant corners, random
/// sign corners and uniform points of the ball.
pub fn estimate_c<S: Real, F: MonotoneSystem<S>>(system: &F, seed: u64) -> f64 {
    let radius = system.a_priori_bound();
    let norm_f0 = system.norm_f0().as_f64();
    let sup = match system.sup_norm_on_ball(radius) {
        Some(s) => s.as_f64(),
        None => {
            let (d, n) = system.dims();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best = norm_f0;
            let mut probe = |u: RegimeField<S>| {
                best = best.max(system.evaluate(&u).sup_norm().as_f64());
            };
            probe(RegimeField::constant(d, n, radius));
            probe(RegimeField::constant(d, n, -radius));
            for k in 0..C_SAMPLES {
                let u = if k % 2 == 0 {
                    RegimeField::from_fn(d, n, |_, _| if rng.gen::<bool>() { radius } else { -radius })
                } else {
                    RegimeField::from_fn(d, n, |_, _| radius * S::lit(rng.gen_range(-1.0..=1.0)))
                };
                probe(u);
            }
            best
        }
    };
    C_SAFETY * sup.max(norm_f0)
}

impl ErrorConstants {
    /// Constants for the iterated-stopping iteration with margin `kappa`
    /// (defaults to half the smallest cost).
    pub fn iterated_stopping<S: Real, F: MonotoneSystem<S>>(
        system: &F,
        costs: &SwitchingCosts<S>,
        kappa: Option<f64>,
    ) -> Result<Self> {
        Self::build(system, costs, kappa, None)
    }

    /// Constants for the time-marching iteration with parameter `eps > 0`.
    pub fn time_marching<S: Real, F: MonotoneSystem<S>>(
        system: &F,
        costs: &SwitchingCosts<S>,
        kappa: Option<f64>,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(QviError::InvalidParameter(format!(
                "pseudo-time parameter must be positive, got {eps}"
            )));
        }
        Self::build(system, costs, kappa, Some(eps))
    }

    fn build<S: Real, F: MonotoneSystem<S>>(
        system: &F,
        costs: &SwitchingCosts<S>,
        kappa: Option<f64>,
        eps: Option<f64>,
    ) -> Result<Self> {
        costs.ensure_positive()?;
        let min_cost = costs.min_off_diagonal().as_f64();
        let kappa = kappa.unwrap_or(0.5 * min_cost);
        if !(kappa > 0.0 && kappa < min_cost) {
            return Err(QviError::InvalidParameter(format!(
                "kappa must lie in (0, {min_cost}), got {kappa}"
            )));
        }
        let norm_f0 = system.norm_f0().as_f64();
        let gamma = system.gamma().as_f64();
        let l_kappa = (2.0 * norm_f0 + kappa) / gamma;
        let (mu, mode) = match eps {
            None => (
                (gamma * kappa / (2.0 * norm_f0 + kappa)).min(1.0),
                ContractionMode::IteratedStopping,
            ),
            Some(e) => (kappa / (kappa + e * l_kappa), ContractionMode::TimeMarching),
        };
        Ok(Self {
            kappa,
            l_kappa,
            mu,
            c_sup: estimate_c(system, 0),
            epsilon: eps,
            mode,
            norm_f0,
            gamma,
            min_cost,
        })
    }

    /// `L_kappa (1 - mu)^n / mu`, the bound on `u - u^n` after `n` sweeps.
    pub fn sweep_bound(&self, n: usize) -> f64 {
        self.l_kappa * (1.0 - self.mu).powi(n as i32) / self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiMinimum {
    pub n_star: u64,
    /// `min_n phi(n)` over non-negative integers.
    pub m: f64,
    /// Closed-form upper bound on `m`.
    pub bound: f64,
    /// Real minimizer of `phi` (0 when `phi` is increasing).
    pub crossover: f64,
}

/// Longest integer scan `phi_minimize` will run.
const PHI_SCAN_LIMIT: f64 = 1e8;

/// Minimizes `phi(n) = nu a^n + b n` over `n = 0, 1, 2, ...`.
pub fn phi_minimize(nu: f64, a: f64, b: f64) -> Result<PhiMinimum> {
    if !(a > 0.0 && a < 1.0 && b > 0.0 && nu > 0.0 && nu.is_finite() && b.is_finite()) {
        return Err(QviError::InvalidParameter(format!(
            "phi needs 0 < a < 1, b > 0, nu > 0; got nu={nu}, a={a}, b={b}"
        )));
    }
    let ln_a = a.ln();
    let ratio = -b / (nu * ln_a);
    let (crossover, bound) = if ratio >= 1.0 {
        (0.0, nu)
    } else {
        let x = ratio.ln() / ln_a;
        (x, -a * b / ln_a + b * (x + 1.0))
    };
    if crossover > PHI_SCAN_LIMIT {
        return Err(QviError::InvalidParameter(format!(
            "phi minimizer {crossover:e} is beyond the scan limit"
        )));
    }
    let last = crossover.ceil() as u64 + 1;
    let phi = |n: u64| nu * a.powf(n as f64) + b * n as f64;
    let (n_star, m) = (0..=last)
        .map(|n| (n, phi(n)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(PhiMinimum {
        n_star,
        m,
        bound,
        crossover,
    })
}

/// Bound on `||u - u^rho||`: zero when every cost exceeds `2 ||F(0)|| / gamma`,
/// otherwise `min_n [ L_kappa (1 - mu)^n / mu + (C / (tau rho))^sigma n ]`.
pub fn penalty_error_bound(constants: &ErrorConstants, rho: f64, sigma: f64, tau: f64) -> f64 {
    if constants.min_cost > 2.0 * constants.norm_f0 / constants.gamma {
        return 0.0;
    }
    let nu = constants.l_kappa / constants.mu;
    let b = (constants.c_sup / (tau * rho)).powf(sigma);
    if constants.mu >= 1.0 {
        // a = 0: phi(0) = nu, phi(n) = b n afterwards.
        return nu.min(b);
    }
    match phi_minimize(nu, 1.0 - constants.mu, b) {
        Ok(p) => p.m,
        Err(_) => nu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_first_branch() {
        let p = phi_minimize(1.0, 0.5, 10.0).unwrap();
        assert_eq!(p.n_star, 0);
        assert_eq!(p.m, 1.0);
        assert_eq!(p.bound, 1.0);
    }

    #[test]
    fn phi_second_branch_against_scan() {
        let (nu, a, b) = (100.0, 0.9, 0.001);
        let p = phi_minimize(nu, a, b).unwrap();
        let (arg, scan) = (0..=200u64)
            .map(|n| (n, nu * a.powf(n as f64) + b * n as f64))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        assert_eq!(p.n_star, arg);
        assert!((p.m - scan).abs() <= 1e-14 * scan);
        assert!(p.m <= p.bound);
        assert!(p.crossover > 0.0);
    }

    #[test]
    fn phi_domain() {
        assert!(phi_minimize(1.0, 1.0, 1.0).is_err());
        assert!(phi_minimize(1.0, 0.5, 0.0).is_err());
        assert!(phi_minimize(-1.0, 0.5, 1.0).is_err());
    }
}
