//! Minimal CSR matrices for the assembled systems.
//!
//! Assembly goes through a fixed sparsity pattern and scatter-adds in a
//! deterministic order, so symmetric local contributions produce a matrix
//! that is symmetric bit for bit.

use crate::num::Real;
use nalgebra::DMatrix;

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<R> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<R>,
}

impl<R: Real> CsrMatrix<R> {
    /// Allocates a zero matrix with the given per-row column patterns.
    /// Patterns are sorted and deduplicated here.
    pub fn from_pattern(nrows: usize, ncols: usize, mut pattern: Vec<Vec<usize>>) -> Self {
        assert_eq!(pattern.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for cols in &mut pattern {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![R::zero(); col_idx.len()];
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[R]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| span.start + k)
    }

    /// Adds `v` to entry `(i, j)`; the slot must exist in the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: R) {
        let slot = self.slot(i, j).expect("entry outside the sparsity pattern");
        self.values[slot] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.slot(i, j).map_or(R::zero(), |s| self.values[s])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[R], y: &mut [R]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut acc = R::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<R> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `r = b - A x` with compensated products and sums, so the result is
    /// accurate to the actual residual size rather than to the rounding
    /// noise of `|A| |x|`. Costs a few times a plain matvec; intended for
    /// convergence certification, not for inner iterations.
    pub fn residual_compensated(&self, x: &[R], b: &[R], r: &mut [R]) {
        use num_traits::MulAdd;
        for i in 0..self.nrows {
            // Neumaier-compensated accumulation of b_i - sum_j a_ij x_j,
            // with exact per-product error terms via fused multiply-add.
            let mut sum = b[i];
            let mut comp = R::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let p = -self.values[k] * x[self.col_idx[k]];
                let p_err = MulAdd::mul_add(-self.values[k], x[self.col_idx[k]], -p);
                let t = sum + p;
                if sum.abs() >= p.abs() {
                    comp += (sum - t) + p;
                } else {
                    comp += (p - t) + sum;
                }
                comp += p_err;
                sum = t;
            }
            r[i] = sum + comp;
        }
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                match self.slot(j, i) {
                    Some(s) => {
                        if self.values[s] != self.values[k] {
                            return false;
                        }
                    }
                    None => {
                        if self.values[k] != R::zero() {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Entrywise `alpha * self + beta * other` over the union pattern.
    pub fn linear_combination(&self, alpha: R, other: &CsrMatrix<R>, beta: R) -> CsrMatrix<R> {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    col_idx.push(ja);
                    values.push(alpha * va[p]);
                    p += 1;
                } else if jb < ja {
                    col_idx.push(jb);
                    values.push(beta * vb[q]);
                    q += 1;
                } else {
                    col_idx.push(ja);
                    values.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }

    /// Submatrix over the rows/columns listed in `keep` (ascending), with
    /// `position[old] = Some(new)` as the index map.
    pub fn restrict(&self, keep: &[usize], position: &[Option<usize>]) -> CsrMatrix<R> {
        let n = keep.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &old_i in keep {
            for k in self.row_ptr[old_i]..self.row_ptr[old_i + 1] {
                if let Some(new_j) = position[self.col_idx[k]] {
                    col_idx.push(new_j);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: n, ncols: n, row_ptr, col_idx, values }
    }

    pub fn to_dense(&self) -> DMatrix<R> {
        let mut dense = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[(i, self.col_idx[k])] = self.values[k];
            }
        }
        dense
    }

    /// Drops stored zeros (used after restriction for tests on structure).
    pub fn prune_zeros(&self) -> CsrMatrix<R> {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[k] != R::zero() {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}
