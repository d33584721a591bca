//! Monotone systems `F: R^{N x d} -> R^{N x d}` together with a generalized
//! derivative (slant) provider.

use crate::error::{QviError, Result};
use crate::field::RegimeField;
use crate::scalar::Real;
use crate::sparse::SparseMatrix;

/// A monotone system with constant `gamma`: whenever `(i, l)` is the
/// position of the largest entry of `u - v` and that entry is non-negative,
/// `F_i(u)_l - F_i(v)_l >= gamma * (u^i_l - v^i_l)`.
///
/// Implementors supply `gamma`; it is property-tested, never inferred.
pub trait MonotoneSystem<S: Real>: Send + Sync {
    fn regimes(&self) -> usize;

    fn nodes(&self) -> usize;

    fn gamma(&self) -> S;

    fn evaluate(&self, u: &RegimeField<S>) -> RegimeField<S>;

    /// A generalized derivative of `F` at `u`, regime-major `(Nd) x (Nd)`.
    fn slant(&self, u: &RegimeField<S>) -> SparseMatrix<S>;

    /// `||F(0)||`.
    fn norm_f0(&self) -> S {
        self.evaluate(&RegimeField::zeros(self.regimes(), self.nodes()))
            .sup_norm()
    }

    /// `sup_{||u|| <= radius} ||F(u)||` when it is known in closed form.
    fn sup_norm_on_ball(&self, _radius: S) -> Option<S> {
        None
    }

    fn dims(&self) -> (usize, usize) {
        (self.regimes(), self.nodes())
    }

    /// A-priori bound `||F(0)|| / gamma` on every penalized solution.
    fn a_priori_bound(&self) -> S {
        self.norm_f0() / self.gamma()
    }
}

impl<S: Real, T: MonotoneSystem<S> + ?Sized> MonotoneSystem<S> for &T {
    fn regimes(&self) -> usize {
        (**self).regimes()
    }
    fn nodes(&self) -> usize {
        (**self).nodes()
    }
    fn gamma(&self) -> S {
        (**self).gamma()
    }
    fn evaluate(&self, u: &RegimeField<S>) -> RegimeField<S> {
        (**self).evaluate(u)
    }
    fn slant(&self, u: &RegimeField<S>) -> SparseMatrix<S> {
        (**self).slant(u)
    }
    fn norm_f0(&self) -> S {
        (**self).norm_f0()
    }
    fn sup_norm_on_ball(&self, radius: S) -> Option<S> {
        (**self).sup_norm_on_ball(radius)
    }
}

/// `F(u) = A u - b` with a constant sparse matrix `A`.
#[derive(Debug, Clone)]
pub struct AffineSystem<S> {
    regimes: usize,
    nodes: usize,
    matrix: SparseMatrix<S>,
    rhs: Vec<S>,
    gamma: S,
    norm_f0: S,
}

impl<S: Real> AffineSystem<S> {
    pub fn new(
        regimes: usize,
        nodes: usize,
        matrix: SparseMatrix<S>,
        rhs: Vec<S>,
        gamma: S,
    ) -> Result<Self> {
        let n = regimes * nodes;
        if regimes < 2 || nodes < 1 {
            return Err(QviError::InvalidParameter(format!(
                "need at least 2 regimes and 1 node, got {regimes}x{nodes}"
            )));
        }
        if matrix.nrows() != n || matrix.ncols() != n || rhs.len() != n {
            return Err(QviError::InvalidParameter(format!(
                "affine system of size {n} got a {}x{} matrix and rhs of length {}",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len()
            )));
        }
        if !(gamma > S::zero()) {
            return Err(QviError::InvalidParameter(format!(
                "monotonicity constant must be positive, got {gamma}"
            )));
        }
        let norm_f0 = rhs.iter().fold(S::zero(), |m, b| m.max(b.abs()));
        Ok(Self {
            regimes,
            nodes,
            matrix,
            rhs,
            gamma,
            norm_f0,
        })
    }

    /// For a Z-matrix (non-positive off-diagonals) the smallest row sum is a
    /// valid monotonicity constant. `None` if `A` is not a Z-matrix or some
    /// row sum is not positive.
    pub fn z_matrix_gamma(matrix: &SparseMatrix<S>) -> Option<S> {
        if matrix.triplets().any(|(r, c, v)| r != c && v > S::zero()) {
            return None;
        }
        let g = matrix
            .row_sums()
            .into_iter()
            .fold(S::infinity(), S::min);
        (g > S::zero()).then_some(g)
    }

    pub fn matrix(&self) -> &SparseMatrix<S> {
        &self.matrix
    }

    pub fn rhs(&self) -> &[S] {
        &self.rhs
    }
}

impl<S: Real> MonotoneSystem<S> for AffineSystem<S> {
    fn regimes(&self) -> usize {
        self.regimes
    }

    fn nodes(&self) -> usize {
        self.nodes
    }

    fn gamma(&self) -> S {
        self.gamma
    }

    fn evaluate(&self, u: &RegimeField<S>) -> RegimeField<S> {
        let au = self.matrix.mul_vec(u.as_slice());
        u.with_values(au.into_iter().zip(&self.rhs).map(|(a, b)| a - *b).collect())
    }

    fn slant(&self, _u: &RegimeField<S>) -> SparseMatrix<S> {
        self.matrix.clone()
    }

    fn norm_f0(&self) -> S {
        self.norm_f0
    }

    /// Row `r` attains `radius * sum_c |a_rc| + |b_r|` at the corner
    /// `u_c = -radius * sign(a_rc) * sign(b_r)`.
    fn sup_norm_on_ball(&self, radius: S) -> Option<S> {
        Some(
            (0..self.matrix.nrows())
                .map(|r| {
                    radius * self.matrix.row(r).map(|(_, v)| v.abs()).sum::<S>()
                        + self.rhs[r].abs()
                })
                .fold(S::zero(), S::max),
        )
    }
}

/// Row-wise minimum over a finite family of affine systems,
/// `F(u)_r = min_a (A_a u - b_a)_r`. Concave, and monotone with the smallest
/// of the members' constants.
#[derive(Debug, Clone)]
pub struct PolicySystem<S> {
    members: Vec<AffineSystem<S>>,
}

impl<S: Real> PolicySystem<S> {
    pub fn new(members: Vec<AffineSystem<S>>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| QviError::InvalidParameter("empty policy family".into()))?;
        if members.iter().any(|m| m.dims() != first.dims()) {
            return Err(QviError::InvalidParameter(
                "policy members have different dimensions".into(),
            ));
        }
        Ok(Self { members })
    }

    /// Index of the minimizing member for each flat row (lowest index on ties).
    pub fn policy(&self, u: &RegimeField<S>) -> Vec<usize> {
        let values: Vec<RegimeField<S>> = self.members.iter().map(|m| m.evaluate(u)).collect();
        (0..u.len())
            .map(|r| {
                (0..values.len())
                    .min_by(|&a, &b| {
                        values[a].as_slice()[r]
                            .partial_cmp(&values[b].as_slice()[r])
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.cmp(&b))
                    })
                    .unwrap()
            })
            .collect()
    }
}

impl<S: Real> MonotoneSystem<S> for PolicySystem<S> {
    fn regimes(&self) -> usize {
        self.members[0].regimes()
    }

    fn nodes(&self) -> usize {
        self.members[0].nodes()
    }

    fn gamma(&self) -> S {
        self.members.iter().map(|m| m.gamma()).fold(S::infinity(), S::min)
    }

    fn evaluate(&self, u: &RegimeField<S>) -> RegimeField<S> {
        let mut out = self.members[0].evaluate(u);
        for m in &self.members[1..] {
            out = out.zip_map(&m.evaluate(u), S::min);
        }
        out
    }

    fn slant(&self, u: &RegimeField<S>) -> SparseMatrix<S> {
        let policy = self.policy(u);
        let n = u.len();
        SparseMatrix::from_triplets(
            n,
            n,
            policy.iter().enumerate().flat_map(|(r, &a)| {
                self.members[a].matrix().row(r).map(move |(c, v)| (r, c, v))
            }).collect::<Vec<_>>(),
        )
    }

    fn sup_norm_on_ball(&self, radius: S) -> Option<S> {
        // |min_a x_a| <= max_a |x_a|, so the largest member bound is valid.
        self.members
            .iter()
            .map(|m| m.sup_norm_on_ball(radius))
            .try_fold(S::zero(), |acc, b| b.map(|b| acc.max(b)))
    }
}

/// `F(u) - shift`, used for the strict-supersolution problem.
#[derive(Debug, Clone)]
pub struct ShiftedSystem<F, S> {
    inner: F,
    shift: S,
}

impl<F, S> ShiftedSystem<F, S> {
    pub fn new(inner: F, shift: S) -> Self {
        Self { inner, shift }
    }
}

impl<S: Real, F: MonotoneSystem<S>> MonotoneSystem<S> for ShiftedSystem<F, S> {
    fn regimes(&self) -> usize {
        self.inner.regimes()
    }
    fn nodes(&self) -> usize {
        self.inner.nodes()
    }
    fn gamma(&self) -> S {
        self.inner.gamma()
    }
    fn evaluate(&self, u: &RegimeField<S>) -> RegimeField<S> {
        let shift = self.shift;
        self.inner.evaluate(u).map(|v| v - shift)
    }
    fn slant(&self, u: &RegimeField<S>) -> SparseMatrix<S> {
        self.inner.slant(u)
    }
    fn sup_norm_on_ball(&self, radius: S) -> Option<S> {
        self.inner
            .sup_norm_on_ball(radius)
            .map(|b| b + self.shift.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_system(gamma: f64, b: [f64; 2]) -> AffineSystem<f64> {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, gamma), (1, 1, gamma)]);
        AffineSystem::new(2, 1, a, b.to_vec(), gamma).unwrap()
    }

    #[test]
    fn affine_evaluate_and_f0() {
        let s = diag_system(1.0, [0.0, 2.0]);
        let u = RegimeField::from_regimes(vec![vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(s.evaluate(&u).as_slice(), &[1.0, -1.0]);
        assert_eq!(s.norm_f0(), 2.0);
        assert_eq!(s.a_priori_bound(), 2.0);
    }

    #[test]
    fn ball_sup_is_attained_at_corner() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 2.0), (0, 1, -1.0), (1, 1, 1.0)]);
        let s = AffineSystem::new(2, 1, a, vec![0.5, -0.25], 1.0).unwrap();
        let bound = s.sup_norm_on_ball(3.0).unwrap();
        assert_eq!(bound, 3.0 * 3.0 + 0.5);
        let corner = RegimeField::from_regimes(vec![vec![-3.0], vec![3.0]]).unwrap();
        assert_eq!(s.evaluate(&corner).sup_norm(), bound);
    }

    #[test]
    fn z_matrix_gamma_is_min_row_sum() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 2.0), (0, 1, -1.0), (1, 1, 3.0)]);
        assert_eq!(AffineSystem::z_matrix_gamma(&a), Some(1.0));
        let b = SparseMatrix::from_triplets(2, 2, [(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        assert_eq!(AffineSystem::z_matrix_gamma(&b), None);
    }

    #[test]
    fn shifted_subtracts_constant() {
        let s = ShiftedSystem::new(diag_system(1.0, [0.0, 0.0]), 0.5);
        let z = RegimeField::zeros(2, 1);
        assert_eq!(s.evaluate(&z).as_slice(), &[-0.5, -0.5]);
    }

    #[test]
    fn policy_picks_row_minimum() {
        let p = PolicySystem::new(vec![diag_system(1.0, [0.0, 0.0]), diag_system(2.0, [1.0, 1.0])])
            .unwrap();
        let u = RegimeField::from_regimes(vec![vec![0.5], vec![2.0]]).unwrap();
        // member 0: (0.5, 2.0); member 1: (0.0, 3.0)
        assert_eq!(p.evaluate(&u).as_slice(), &[0.0, 2.0]);
        assert_eq!(p.policy(&u), vec![1, 0]);
        assert_eq!(p.slant(&u).get(0, 0), 2.0);
        assert_eq!(p.gamma(), 1.0);
    }
}
