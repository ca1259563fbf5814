//! Threshold estimator for single-pilot frames: every observed cell whose
//! pilot-normalised response clears three noise standard deviations is
//! kept as an independent delay-Doppler tap.

use alloc::vec::Vec;

use crate::kernels::{wrap, GridDims};
use crate::frame::SparseSystem;
use crate::sparse::SparseMatrix;
use crate::{Result, C64};

/// Tap `coef` at delay shift `l` and cyclic Doppler shift `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub l: usize,
    pub k: usize,
    pub coef: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    pub taps: Vec<Tap>,
    /// Thresholded response per observation cell, zero where rejected.
    pub response: Vec<C64>,
}

/// Noise standard deviation relative to a unit pilot at the given pilot SNR.
pub fn sigma_p(snrp_db: f64) -> f64 {
    libm::pow(libm::pow(10.0, snrp_db / 10.0), -0.5)
}

pub fn threshold_baseline(sys: &SparseSystem, sigma_p: f64) -> Result<BaselineEstimate> {
    let xp = sys.single_pilot()?;
    let (cfg, dims) = (&sys.cfg, sys.dims);
    let mut taps = Vec::new();
    let mut response = Vec::with_capacity(sys.y.len());
    for (&(k, l), &y) in cfg.window(dims).iter().zip(&sys.y) {
        let v = y / xp;
        if v.norm() > 3.0 * sigma_p {
            taps.push(Tap { l: l - cfg.l0, k: wrap(k as i64 - cfg.k0 as i64, dims.n), coef: v });
            response.push(v);
        } else {
            response.push(C64::new(0.0, 0.0));
        }
    }
    Ok(BaselineEstimate { taps, response })
}

impl BaselineEstimate {
    /// Channel matrix acting as `y[k, l] = sum coef * x[k - tap.k, l - tap.l]`.
    pub fn to_matrix(&self, dims: GridDims) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.taps.len() * dims.mn());
        for t in &self.taps {
            for k in 0..dims.n {
                let kp = wrap(k as i64 - t.k as i64, dims.n);
                for l in 0..dims.m {
                    let lp = wrap(l as i64 - t.l as i64, dims.m);
                    trip.push((dims.index(k, l), dims.index(kp, lp), t.coef));
                }
            }
        }
        SparseMatrix::from_triplets(dims.mn(), trip)
    }
}
