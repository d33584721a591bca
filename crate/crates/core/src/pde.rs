//! Finite-difference discretization of the infinite-horizon switching
//! problem on `[0, 2)`: one tridiagonal operator per regime with forward
//! differences for the drift, central differences for the diffusion and a
//! zero Dirichlet value at `x = 2`.

use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};
use crate::scalar::Real;
use crate::sparse::SparseMatrix;
use crate::system::AffineSystem;

/// Piecewise-linear reward: on `(left, right]` the value is
/// `value + slope * (x - left)`. Nodes outside every piece get 0; the first
/// matching piece wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardPiece {
    pub left: f64,
    pub right: f64,
    pub value: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "pieces")]
pub enum RewardFunction {
    /// `2 (1 - x)` on `(0.75, 1]`.
    TwoRegime,
    /// Alternating tent profile with kinks at 0.5, 1, 1.5 and support `(0, 1.75]`.
    ThreeRegime,
    Custom(Vec<RewardPiece>),
}

impl RewardFunction {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            RewardFunction::TwoRegime => {
                if x > 0.75 && x <= 1.0 {
                    2.0 * (1.0 - x)
                } else {
                    0.0
                }
            }
            RewardFunction::ThreeRegime => {
                if x > 0.0 && x <= 0.5 {
                    -(x - 0.5)
                } else if x > 0.5 && x <= 1.0 {
                    x - 0.5
                } else if x > 1.0 && x <= 1.5 {
                    -(x - 1.5)
                } else if x > 1.5 && x <= 1.75 {
                    x - 1.5
                } else {
                    0.0
                }
            }
            RewardFunction::Custom(pieces) => pieces
                .iter()
                .find(|p| x > p.left && x <= p.right)
                .map_or(0.0, |p| p.value + p.slope * (x - p.left)),
        }
    }

    fn validate(&self) -> Result<()> {
        if let RewardFunction::Custom(pieces) = self {
            for p in pieces {
                let finite = [p.left, p.right, p.value, p.slope].iter().all(|v| v.is_finite());
                if !finite || p.left >= p.right {
                    return Err(QviError::InvalidParameter(format!("bad reward piece {p:?}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeParams {
    pub sigma_vol: f64,
    pub mu_drift: f64,
    pub r: f64,
    pub regimes: usize,
    pub domain_right: f64,
    pub nodes: usize,
    pub reward: RewardFunction,
}

impl Default for PdeParams {
    fn default() -> Self {
        Self::two_regime()
    }
}

impl PdeParams {
    pub fn two_regime() -> Self {
        Self {
            sigma_vol: 0.2,
            mu_drift: 0.06,
            r: 0.02,
            regimes: 2,
            domain_right: 2.0,
            nodes: 100,
            reward: RewardFunction::TwoRegime,
        }
    }

    pub fn three_regime() -> Self {
        Self {
            regimes: 3,
            reward: RewardFunction::ThreeRegime,
            ..Self::two_regime()
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn h(&self) -> f64 {
        self.domain_right / self.nodes as f64
    }

    /// `x_l = l h`, `l = 0..N-1`.
    pub fn grid(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.nodes).map(|l| l as f64 * h).collect()
    }

    /// Investment fraction `(i - 1) / (d - 1)` of regime `i` (0-based here).
    pub fn nu(&self, regime: usize) -> f64 {
        regime as f64 / (self.regimes - 1) as f64
    }

    /// Nearest grid index to `x`, if `x` is on the grid up to `1e-9 h`.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let h = self.h();
        let k = (x / h).round();
        if k < 0.0 || k >= self.nodes as f64 || (k * h - x).abs() > 1e-9 * h {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Default probe: `x = 0.5` for two regimes, `x = 1` otherwise.
    pub fn default_probe(&self) -> f64 {
        match self.reward {
            RewardFunction::TwoRegime => 0.5,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(QviError::InvalidParameter(m.to_string()));
        if !(self.sigma_vol > 0.0 && self.sigma_vol.is_finite()) {
            return bad("volatility must be positive");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad("interest rate must be positive");
        }
        if !self.mu_drift.is_finite() {
            return bad("drift must be finite");
        }
        if self.regimes < 2 {
            return bad("need at least two regimes");
        }
        if self.nodes < 2 {
            return bad("need at least two grid nodes");
        }
        if !(self.domain_right > 0.0 && self.domain_right.is_finite()) {
            return bad("domain must have positive length");
        }
        // Forward differencing is upwind only for a non-negative drift.
        if (0..self.regimes).any(|i| self.r + self.nu(i) * (self.mu_drift - self.r) < 0.0) {
            return bad("drift coefficient must be non-negative in every regime");
        }
        self.reward.validate()
    }
}

/// `l(x_l)` on the grid.
pub fn reward_values(params: &PdeParams) -> Vec<f64> {
    params.grid().into_iter().map(|x| params.reward.evaluate(x)).collect()
}

/// `F_i(u)_l = -(1/2) s^2 nu_i^2 x_l^2 D2 u^i_l - (r + nu_i (mu - r)) x_l D+ u^i_l + r u^i_l - l(x_l)`,
/// block diagonal over regimes, with `gamma = r`.
pub fn assemble<S: Real>(params: &PdeParams) -> Result<AffineSystem<S>> {
    params.validate()?;
    let n = params.nodes;
    let d = params.regimes;
    let h = params.h();
    let x = params.grid();
    let reward = reward_values(params);
    let mut trips = Vec::with_capacity(3 * n * d);
    for i in 0..d {
        let nu = params.nu(i);
        for l in 0..n {
            let a = 0.5 * params.sigma_vol.powi(2) * nu * nu * x[l] * x[l] / (h * h);
            let b = (params.r + nu * (params.mu_drift - params.r)) * x[l] / h;
            let row = i * n + l;
            trips.push((row, row, S::lit(2.0 * a + b + params.r)));
            if l > 0 && a != 0.0 {
                trips.push((row, row - 1, S::lit(-a)));
            }
            if l + 1 < n && a + b != 0.0 {
                trips.push((row, row + 1, S::lit(-a - b)));
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(n * d, n * d, trips);
    let rhs = (0..d).flat_map(|_| reward.iter().map(|&v| S::lit(v))).collect();
    AffineSystem::new(d, n, matrix, rhs, S::lit(params.r))
}
