//! The unknown of every problem: one vector of node values per regime.

use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};
use crate::scalar::{sup_dist_slice, sup_norm_slice, Real};

/// Values `u^i_l` for regimes `i in 0..d` and grid nodes `l in 0..n`.
///
/// Stored regime-major: the flat index of `(i, l)` is `i * n + l`. Every
/// sparse operator in the crate uses the same ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeField<S> {
    regimes: usize,
    nodes: usize,
    values: Vec<S>,
}

impl<S: Real> RegimeField<S> {
    pub fn zeros(regimes: usize, nodes: usize) -> Self {
        Self::constant(regimes, nodes, S::zero())
    }

    pub fn constant(regimes: usize, nodes: usize, value: S) -> Self {
        Self {
            regimes,
            nodes,
            values: vec![value; regimes * nodes],
        }
    }

    /// Wraps a regime-major flat vector.
    pub fn from_flat(regimes: usize, nodes: usize, values: Vec<S>) -> Result<Self> {
        if regimes < 2 || nodes < 1 {
            return Err(QviError::InvalidParameter(format!(
                "need at least 2 regimes and 1 node, got {regimes}x{nodes}"
            )));
        }
        if values.len() != regimes * nodes {
            return Err(QviError::InvalidParameter(format!(
                "flat vector has {} entries, expected {}",
                values.len(),
                regimes * nodes
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QviError::InvalidParameter("non-finite entry".into()));
        }
        Ok(Self {
            regimes,
            nodes,
            values,
        })
    }

    /// Builds a field from one vector per regime.
    pub fn from_regimes(rows: Vec<Vec<S>>) -> Result<Self> {
        let regimes = rows.len();
        let nodes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nodes) {
            return Err(QviError::InvalidParameter(
                "regime vectors have different lengths".into(),
            ));
        }
        Self::from_flat(regimes, nodes, rows.into_iter().flatten().collect())
    }

    pub fn from_fn(regimes: usize, nodes: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut values = Vec::with_capacity(regimes * nodes);
        for i in 0..regimes {
            for l in 0..nodes {
                values.push(f(i, l));
            }
        }
        Self {
            regimes,
            nodes,
            values,
        }
    }

    #[inline]
    pub fn regimes(&self) -> usize {
        self.regimes
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.regimes, self.nodes)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, regime: usize, node: usize) -> usize {
        regime * self.nodes + node
    }

    #[inline]
    pub fn get(&self, regime: usize, node: usize) -> S {
        self.values[regime * self.nodes + node]
    }

    #[inline]
    pub fn set(&mut self, regime: usize, node: usize, value: S) {
        self.values[regime * self.nodes + node] = value;
    }

    pub fn regime(&self, regime: usize) -> &[S] {
        &self.values[regime * self.nodes..(regime + 1) * self.nodes]
    }

    pub fn regime_mut(&mut self, regime: usize) -> &mut [S] {
        let n = self.nodes;
        &mut self.values[regime * n..(regime + 1) * n]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }

    /// Same shape, values replaced. Panics on length mismatch.
    pub fn with_values(&self, values: Vec<S>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            regimes: self.regimes,
            nodes: self.nodes,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!(self.dims(), other.dims());
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add_scalar(&self, shift: S) -> Self {
        self.map(|v| v + shift)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn sup_norm(&self) -> S {
        sup_norm_slice(&self.values)
    }

    pub fn sup_dist(&self, other: &Self) -> S {
        sup_dist_slice(&self.values, &other.values)
    }

    /// Largest entry of `self - other` (signed).
    pub fn max_diff(&self, other: &Self) -> S {
        self.values
            .iter()
            .zip(&other.values)
            .fold(S::neg_infinity(), |m, (a, b)| m.max(*a - *b))
    }

    /// Componentwise `self <= other + tol`.
    pub fn le_with_tol(&self, other: &Self, tol: S) -> bool {
        self.dims() == other.dims() && self.max_diff(other) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_dims(&self, regimes: usize, nodes: usize) -> Result<()> {
        if self.dims() != (regimes, nodes) {
            return Err(QviError::DimensionMismatch {
                expected: (regimes, nodes),
                found: self.dims(),
            });
        }
        Ok(())
    }

    /// Regime-wise maximum `max_i u^i_l` per node.
    pub fn regime_max(&self) -> Vec<S> {
        (0..self.nodes)
            .map(|l| {
                (0..self.regimes).fold(S::neg_infinity(), |m, i| m.max(self.get(i, l)))
            })
            .collect()
    }

    /// `max_{i,j} ||u^i - u^j||`, the spread between regimes.
    pub fn regime_gap(&self) -> S {
        (0..self.nodes).fold(S::zero(), |m, l| {
            let (lo, hi) = (0..self.regimes).fold(
                (S::infinity(), S::neg_infinity()),
                |(lo, hi), i| (lo.min(self.get(i, l)), hi.max(self.get(i, l))),
            );
            m.max(hi - lo)
        })
    }

    /// Converts to `f64` storage, e.g. for reporting.
    pub fn to_f64(&self) -> RegimeField<f64> {
        RegimeField {
            regimes: self.regimes,
            nodes: self.nodes,
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }
}
