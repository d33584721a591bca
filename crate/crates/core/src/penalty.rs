use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Penalty `pi(y) = (max(y, 0))^(1/sigma)` of degree `sigma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFunction<S> {
    sigma: S,
}

impl<S: Real> PenaltyFunction<S> {
    /// Panics unless `sigma` is positive and finite.
    pub fn new(sigma: S) -> Self {
        assert!(
            sigma > S::zero() && sigma.is_finite(),
            "penalty degree must be positive"
        );
        Self { sigma }
    }

    /// `pi(y) = y^+`, the semismooth choice used by the Newton solver.
    pub fn linear() -> Self {
        Self { sigma: S::one() }
    }

    #[inline]
    pub fn sigma(&self) -> S {
        self.sigma
    }

    #[inline]
    pub fn is_linear(&self) -> bool {
        self.sigma == S::one()
    }

    /// Lower-bound constant: `pi(y) >= tau * y^(1/sigma)` for `y >= 0`.
    #[inline]
    pub fn tau(&self) -> S {
        S::one()
    }

    #[inline]
    pub fn value(&self, y: S) -> S {
        if y <= S::zero() {
            S::zero()
        } else if self.is_linear() {
            y
        } else {
            y.powf(self.sigma.recip())
        }
    }

    /// An element of the generalized derivative. The kink `y = 0` maps to 0.
    #[inline]
    pub fn subderivative(&self, y: S) -> S {
        if y <= S::zero() {
            S::zero()
        } else if self.is_linear() {
            S::one()
        } else {
            let p = self.sigma.recip();
            p * y.powf(p - S::one())
        }
    }
}

impl<S: Real> Default for PenaltyFunction<S> {
    fn default() -> Self {
        Self::linear()
    }
}
