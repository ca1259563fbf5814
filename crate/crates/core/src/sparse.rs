//! Compressed sparse row storage for effective channel matrices.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Dense matrices are only materialised up to this order.
pub const DENSE_LIMIT: usize = 8192;

/// Square complex matrix in CSR form with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok((0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `||self - other||_F^2`, merging the two sparsity patterns.
    pub fn diff_frobenius_sqr(&self, other: &SparseMatrix) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut acc = 0.0;
        for r in 0..self.dim {
            let (mut a, mut b) = (self.row(r).peekable(), other.row(r).peekable());
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        acc += (va - vb).norm_sqr();
                        a.next();
                        b.next();
                    }
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        acc += va.norm_sqr();
                        a.next();
                    }
                    (Some(_), Some((_, vb))) => {
                        acc += vb.norm_sqr();
                        b.next();
                    }
                    (Some((_, va)), None) => {
                        acc += va.norm_sqr();
                        a.next();
                    }
                    (None, Some((_, vb))) => {
                        acc += vb.norm_sqr();
                        b.next();
                    }
                    (None, None) => break,
                }
            }
        }
        Ok(acc)
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        if self.dim > DENSE_LIMIT {
            return Err(Error::TooLarge(self.dim));
        }
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                out[(r, c)] = v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_merge_and_diff_matches_dense() {
        let c = |r: f64| C64::new(r, 0.0);
        let a = SparseMatrix::from_triplets(3, vec![(0, 1, c(1.0)), (2, 0, c(2.0)), (0, 1, c(0.5))]);
        let b = SparseMatrix::from_triplets(3, vec![(0, 1, c(1.0)), (1, 1, c(3.0))]);
        assert_eq!(a.nnz(), 2);
        let d = (a.to_dense().unwrap() - b.to_dense().unwrap()).norm_squared();
        assert!((a.diff_frobenius_sqr(&b).unwrap() - d).abs() < 1e-14);
        let y = a.mul_vec(&[c(1.0), c(2.0), c(3.0)]).unwrap();
        assert_eq!(y, vec![c(3.0), c(0.0), c(2.0)]);
    }
}
