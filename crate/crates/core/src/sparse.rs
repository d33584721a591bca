//! Compressed sparse row matrices and the direct solver used for every
//! Newton step.
//!
//! `linear_solve` reorders the unknowns with reverse Cuthill-McKee, factors
//! the permuted matrix as a band without pivoting, and falls back to dense LU
//! with partial pivoting when a pivot collapses. The slants produced in this
//! crate are row diagonally dominant, so the band path is the normal one.

use std::collections::VecDeque;

use thiserror::Error;

use crate::scalar::{sup_norm_slice, Real};

/// Largest system the dense fallback will factor.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("matrix is numerically singular (pivot {pivot} of {size})")]
    Singular { pivot: usize, size: usize },
    #[error("operator is {rows}x{cols}, right-hand side has length {rhs}")]
    Shape { rows: usize, cols: usize, rhs: usize },
    #[error("dense fallback refused for size {0} > {DENSE_LIMIT}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<S> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<S>,
}

impl<S: Real> SparseMatrix<S> {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, S)> = triplets.into_iter().collect();
        t.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<S> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() = *vals.last().unwrap() + v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|k| (k, k, S::one())))
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map_or(S::zero(), |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.nrows.min(self.ncols))
            .map(|k| self.get(k, k))
            .collect()
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Sum of the entries of each row.
    pub fn row_sums(&self) -> Vec<S> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// Infinity-norm operator bound `max_r sum_c |a_rc|`.
    pub fn max_abs_row_sum(&self) -> S {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<S>())
            .fold(S::zero(), S::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<S>> {
        let mut m = vec![vec![S::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            m[r][c] = v;
        }
        m
    }

    pub fn max_abs_entry(&self) -> S {
        sup_norm_slice(&self.vals)
    }
}

/// Solves `op * x = rhs`.
pub fn linear_solve<S: Real>(op: &SparseMatrix<S>, rhs: &[S]) -> Result<Vec<S>, SolveError> {
    let n = op.nrows();
    if op.ncols() != n || rhs.len() != n {
        return Err(SolveError::Shape {
            rows: n,
            cols: op.ncols(),
            rhs: rhs.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = op.max_abs_entry();
    if scale == S::zero() {
        return Err(SolveError::Singular { pivot: 0, size: n });
    }
    let factor: Box<dyn Fn(&[S]) -> Vec<S>> = match BandLu::factor(op, scale) {
        Some(lu) => Box::new(move |b| lu.solve(b)),
        None => {
            if n > DENSE_LIMIT {
                return Err(SolveError::TooLarge(n));
            }
            let lu = DenseLu::factor(op, scale)?;
            Box::new(move |b| lu.solve(b))
        }
    };

    let mut x = factor(rhs);
    // Up to two steps of iterative refinement when the backward error is
    // visibly above roundoff.
    let target = S::lit(1e-12) * (S::one() + sup_norm_slice(rhs));
    for _ in 0..2 {
        let ax = op.mul_vec(&x);
        let r: Vec<S> = rhs.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        if sup_norm_slice(&r) <= target {
            break;
        }
        let dx = factor(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi = *xi + di;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Singular { pivot: n, size: n });
    }
    Ok(x)
}

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering<S: Real>(op: &SparseMatrix<S>) -> Vec<usize> {
    let n = op.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in op.triplets() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&k| (degree[k], k));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

struct BandLu<S> {
    n: usize,
    lower: usize,
    upper: usize,
    band: Vec<S>,
    perm: Vec<usize>,
}

impl<S: Real> BandLu<S> {
    fn factor(op: &SparseMatrix<S>, scale: S) -> Option<Self> {
        let n = op.nrows();
        let perm = rcm_ordering(op);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut lower, mut upper) = (0usize, 0usize);
        for (r, c, _) in op.triplets() {
            let (r, c) = (inv[r], inv[c]);
            if r > c {
                lower = lower.max(r - c);
            } else {
                upper = upper.max(c - r);
            }
        }
        let w = lower + upper + 1;
        // Band storage would exceed a dense matrix; let the dense path handle it.
        if w * 2 > n + 1 && n > 8 {
            return None;
        }
        let mut band = vec![S::zero(); n * w];
        for (r, c, v) in op.triplets() {
            let (r, c) = (inv[r], inv[c]);
            band[r * w + c + lower - r] = band[r * w + c + lower - r] + v;
        }
        let tiny = scale * S::epsilon() * S::lit(16.0);
        let at = |r: usize, c: usize| r * w + c + lower - r;
        for k in 0..n {
            let piv = band[at(k, k)];
            if piv.abs() <= tiny {
                return None;
            }
            for r in k + 1..=(k + lower).min(n - 1) {
                let f = band[at(r, k)] / piv;
                if f == S::zero() {
                    continue;
                }
                band[at(r, k)] = f;
                for c in k + 1..=(k + upper).min(n - 1) {
                    band[at(r, c)] = band[at(r, c)] - f * band[at(k, c)];
                }
            }
        }
        Some(Self {
            n,
            lower,
            upper,
            band,
            perm,
        })
    }

    fn solve(&self, rhs: &[S]) -> Vec<S> {
        let (n, kl, ku) = (self.n, self.lower, self.upper);
        let w = kl + ku + 1;
        let at = |r: usize, c: usize| r * w + c + kl - r;
        let mut y: Vec<S> = self.perm.iter().map(|&old| rhs[old]).collect();
        for r in 0..n {
            let mut s = y[r];
            for c in r.saturating_sub(kl)..r {
                s = s - self.band[at(r, c)] * y[c];
            }
            y[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = y[r];
            for c in r + 1..=(r + ku).min(n - 1) {
                s = s - self.band[at(r, c)] * y[c];
            }
            y[r] = s / self.band[at(r, r)];
        }
        let mut x = vec![S::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

struct DenseLu<S> {
    n: usize,
    lu: Vec<S>,
    pivots: Vec<usize>,
}

impl<S: Real> DenseLu<S> {
    fn factor(op: &SparseMatrix<S>, scale: S) -> Result<Self, SolveError> {
        let n = op.nrows();
        let mut lu = vec![S::zero(); n * n];
        for (r, c, v) in op.triplets() {
            lu[r * n + c] = lu[r * n + c] + v;
        }
        let tiny = scale * S::epsilon() * S::lit(4.0);
        let mut pivots = vec![0; n];
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, lu[r * n + k].abs()))
                .fold((k, S::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= tiny {
                return Err(SolveError::Singular { pivot: k, size: n });
            }
            pivots[k] = p;
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
            }
            let piv = lu[k * n + k];
            for r in k + 1..n {
                let f = lu[r * n + k] / piv;
                lu[r * n + k] = f;
                if f != S::zero() {
                    for c in k + 1..n {
                        lu[r * n + c] = lu[r * n + c] - f * lu[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu, pivots })
    }

    fn solve(&self, rhs: &[S]) -> Vec<S> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
        }
        for r in 0..n {
            let s = (0..r).fold(x[r], |s, c| s - self.lu[r * n + c] * x[c]);
            x[r] = s;
        }
        for r in (0..n).rev() {
            let s = (r + 1..n).fold(x[r], |s, c| s - self.lu[r * n + c] * x[c]);
            x[r] = s / self.lu[r * n + r];
        }
        x
    }
}
