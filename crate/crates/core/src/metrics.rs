//! Error metrics.

use alloc::vec::Vec;

use crate::sparse::SparseMatrix;
use crate::{Result, C64};

/// Lowest value reported in dB; exact estimates map here.
pub const DB_FLOOR: f64 = -200.0;

pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * libm::log10(x)).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Trial-averaged `||x_hat - x||^2 / ||x||^2`, linear scale.
pub fn nmse(estimates: &[Vec<C64>], truth: &[C64]) -> f64 {
    let den: f64 = truth.iter().map(|v| v.norm_sqr()).sum();
    let num: f64 = estimates
        .iter()
        .map(|e| e.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
        .sum();
    num / (estimates.len() as f64 * den)
}

pub fn nmse_real(estimate: &[f64], truth: &[f64]) -> f64 {
    let den: f64 = truth.iter().map(|v| v * v).sum();
    estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / den
}

/// `||H_hat - H||_F^2 / ||H||_F^2`.
pub fn nmse_matrix(estimate: &SparseMatrix, truth: &SparseMatrix) -> Result<f64> {
    Ok(estimate.diff_frobenius_sqr(truth)? / truth.frobenius_sqr())
}

/// Median of a sample; NaN for an empty one.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nmse_examples() {
        let x = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        assert_eq!(to_db(nmse(&[x.clone(), x.clone()], &x)), DB_FLOOR);
        let zero = vec![C64::new(0.0, 0.0); 2];
        assert!(to_db(nmse(core::slice::from_ref(&zero), &x)).abs() < 1e-12);
        let twice: Vec<C64> = x.iter().map(|v| v * 2.0).collect();
        assert!((to_db(nmse(&[twice, x.clone()], &x)) + 3.0103).abs() < 1e-4);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
