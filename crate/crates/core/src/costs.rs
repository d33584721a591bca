use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};
use crate::scalar::Real;

/// Switching costs `c^{i,j}` between regimes. Diagonal entries are unused and
/// stored as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCosts<S> {
    regimes: usize,
    costs: Vec<S>,
    uniform: Option<S>,
}

impl<S: Real> SwitchingCosts<S> {
    /// The same cost `c >= 0` for every ordered pair of distinct regimes.
    pub fn uniform(regimes: usize, c: S) -> Result<Self> {
        if regimes < 2 {
            return Err(QviError::InvalidParameter(format!(
                "need at least 2 regimes, got {regimes}"
            )));
        }
        if !c.is_finite() || c < S::zero() {
            return Err(QviError::InvalidParameter(format!(
                "switching cost must be finite and non-negative, got {c}"
            )));
        }
        let mut costs = vec![c; regimes * regimes];
        for i in 0..regimes {
            costs[i * regimes + i] = S::zero();
        }
        Ok(Self {
            regimes,
            costs,
            uniform: Some(c),
        })
    }

    /// General per-pair costs from a square matrix; the diagonal is ignored.
    pub fn from_matrix(matrix: Vec<Vec<S>>) -> Result<Self> {
        let regimes = matrix.len();
        if regimes < 2 || matrix.iter().any(|row| row.len() != regimes) {
            return Err(QviError::InvalidParameter(
                "cost matrix must be square with at least 2 regimes".into(),
            ));
        }
        let mut costs = vec![S::zero(); regimes * regimes];
        for (i, row) in matrix.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if !c.is_finite() || c < S::zero() {
                    return Err(QviError::InvalidParameter(format!(
                        "cost c[{i}][{j}] = {c} must be finite and non-negative"
                    )));
                }
                costs[i * regimes + j] = c;
            }
        }
        Ok(Self {
            regimes,
            costs,
            uniform: None,
        })
    }

    #[inline]
    pub fn regimes(&self) -> usize {
        self.regimes
    }

    /// Cost of switching from `from` to `to`.
    #[inline]
    pub fn cost(&self, from: usize, to: usize) -> S {
        self.costs[from * self.regimes + to]
    }

    pub fn uniform_value(&self) -> Option<S> {
        self.uniform
    }

    pub fn min_off_diagonal(&self) -> S {
        self.off_diagonal().fold(S::infinity(), |m, (_, _, c)| m.min(c))
    }

    pub fn max_off_diagonal(&self) -> S {
        self.off_diagonal().fold(S::zero(), |m, (_, _, c)| m.max(c))
    }

    fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        let d = self.regimes;
        (0..d)
            .flat_map(move |i| (0..d).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(move |(i, j)| (i, j, self.cost(i, j)))
    }

    /// Fails with [`QviError::ZeroCost`] unless every off-diagonal cost is positive.
    pub fn ensure_positive(&self) -> Result<()> {
        match self.off_diagonal().find(|&(_, _, c)| c <= S::zero()) {
            Some((from, to, _)) => Err(QviError::ZeroCost { from, to }),
            None => Ok(()),
        }
    }

    /// Costs reduced by `kappa`, i.e. `c^{i,j} - kappa`. Requires `0 < kappa < min c`.
    pub fn reduced_by(&self, kappa: S) -> Result<Self> {
        if !(kappa > S::zero() && kappa < self.min_off_diagonal()) {
            return Err(QviError::InvalidParameter(format!(
                "margin {kappa} must lie in (0, {})",
                self.min_off_diagonal()
            )));
        }
        let d = self.regimes;
        let costs = (0..d * d)
            .map(|k| {
                if k / d == k % d {
                    S::zero()
                } else {
                    self.costs[k] - kappa
                }
            })
            .collect();
        Ok(Self {
            regimes: d,
            costs,
            uniform: self.uniform.map(|c| c - kappa),
        })
    }
}
