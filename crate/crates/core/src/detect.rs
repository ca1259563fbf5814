//! Linear MMSE data detection with QPSK slicing.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::sparse::SparseMatrix;
use crate::{Error, Result, C64};

/// `(H^H H + (1/snr) I)^{-1} H^H y`, where `snr` is symbol power over noise variance.
pub fn lmmse_equalize(y: &[C64], h: &DMatrix<C64>, snr: f64) -> Result<Vec<C64>> {
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: y.len() });
    }
    if !(snr > 0.0) {
        return Err(crate::error::domain("detector SNR must be positive"));
    }
    let hh = h.adjoint();
    let mut a = &hh * h;
    for i in 0..a.nrows() {
        a[(i, i)] += C64::new(1.0 / snr, 0.0);
    }
    let rhs = &hh * DVector::from_column_slice(y);
    let sol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("detector normal matrix is not positive definite".into()))?
        .solve(&rhs);
    Ok(sol.iter().copied().collect())
}

/// LMMSE detector for a subset of transmit cells of a sparse channel
/// matrix, with the Gram matrix formed once and reused across SNRs.
#[derive(Debug, Clone)]
pub struct DataDetector {
    h: SparseMatrix,
    cols: Vec<usize>,
    gram: DMatrix<C64>,
}

impl DataDetector {
    /// `cols` are the grid cells holding data, in symbol order.
    pub fn new(h: &SparseMatrix, cols: &[usize]) -> Self {
        let mut pos = alloc::vec![usize::MAX; h.dim()];
        for (i, &c) in cols.iter().enumerate() {
            pos[c] = i;
        }
        let mut gram = DMatrix::zeros(cols.len(), cols.len());
        let mut row: Vec<(usize, C64)> = Vec::new();
        for r in 0..h.dim() {
            row.clear();
            row.extend(h.row(r).filter(|(c, _)| pos[*c] != usize::MAX).map(|(c, v)| (pos[c], v)));
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    gram[(a, b)] += va.conj() * vb;
                }
            }
        }
        Self { h: h.clone(), cols: cols.to_vec(), gram }
    }

    /// Equalise `y`, already stripped of non-data contributions, and slice
    /// symbols sent at amplitude `scale` with per-symbol SNR `snr`.
    pub fn detect(&self, y: &[C64], snr: f64, scale: f64) -> Result<Vec<C64>> {
        if y.len() != self.h.dim() {
            return Err(Error::DimensionMismatch { expected: self.h.dim(), got: y.len() });
        }
        if !(snr > 0.0) {
            return Err(crate::error::domain("detector SNR must be positive"));
        }
        let mut pos = alloc::vec![usize::MAX; self.h.dim()];
        for (i, &c) in self.cols.iter().enumerate() {
            pos[c] = i;
        }
        let mut rhs = DVector::zeros(self.cols.len());
        for (r, yr) in y.iter().enumerate() {
            for (c, v) in self.h.row(r) {
                if pos[c] != usize::MAX {
                    rhs[pos[c]] += v.conj() * yr;
                }
            }
        }
        let mut a = self.gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += C64::new(1.0 / snr, 0.0);
        }
        let sol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("detector normal matrix is not positive definite".into()))?
            .solve(&rhs);
        Ok(sol.iter().map(|v| qpsk_slice(v / scale)).collect())
    }
}

/// Nearest unit-power QPSK point.
pub fn qpsk_slice(v: C64) -> C64 {
    let re = if v.re >= 0.0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if v.im >= 0.0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    C64::new(re, im)
}

/// Equalise and slice; `scale` is the amplitude the unit symbols were sent with.
pub fn lmmse_detect(y: &[C64], h: &DMatrix<C64>, snr: f64, scale: f64) -> Result<Vec<C64>> {
    Ok(lmmse_equalize(y, h, snr)?.into_iter().map(|v| qpsk_slice(v / scale)).collect())
}

/// Bit errors between two unit QPSK sequences (two bits per symbol).
pub fn qpsk_bit_errors(a: &[C64], b: &[C64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| usize::from((x.re >= 0.0) != (y.re >= 0.0)) + usize::from((x.im >= 0.0) != (y.im >= 0.0)))
        .sum()
}
