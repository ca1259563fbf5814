//! Fisher information and Cramer-Rao bounds for gains and fractional
//! Doppler shifts on a known support.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::channel::DDChannel;
use crate::frame::FrameConfig;
use crate::kernels::{spread, spread_prime, wrap};
use crate::{Error, Result, Waveform, C64};

/// Noiseless pilot observation and its derivatives with respect to every
/// gain (columns `0..P`) and fractional Doppler (columns `P..2P`).
pub fn observation_jacobian(
    ch: &DDChannel,
    cfg: &FrameConfig,
    pilots: &[C64],
    wf: Waveform,
) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let dims = ch.dims;
    cfg.validate(dims)?;
    if pilots.len() != cfg.pilot_count() {
        return Err(Error::DimensionMismatch { expected: cfg.pilot_count(), got: pilots.len() });
    }
    let sp = libm::sqrt(cfg.pilot_power);
    let np = ch.paths.len();
    let rows = cfg.window(dims);
    let mn = dims.mn() as f64;
    let nh = ch.n_hat as i64;
    let mut u = vec![C64::new(0.0, 0.0); rows.len()];
    let mut jac = DMatrix::zeros(rows.len(), 2 * np);
    for (z, &(k, l)) in rows.iter().enumerate() {
        for (p, path) in ch.paths.iter().enumerate() {
            let nu = path.k as f64 + path.kappa;
            // the phase and its kappa-derivative factor
            let (phase, dphase) = match wf {
                Waveform::Bi => {
                    let a = -2.0 * PI * path.l as f64 / mn;
                    (C64::from_polar(1.0, a * nu), C64::new(0.0, a))
                }
                Waveform::Rect => {
                    let a = 2.0 * PI * (l as f64 - path.l as f64) / mn;
                    (C64::from_polar(1.0, a * nu), C64::new(0.0, a))
                }
            };
            for q in -nh..=nh {
                let kp = wrap(k as i64 - path.k + q, dims.n);
                let lp = wrap(l as i64 - path.l as i64, dims.m);
                let Some(slot) = cfg.pilot_slot(kp, lp, dims) else { continue };
                let x = pilots[slot] * sp;
                let f = spread(q, path.kappa, dims.n);
                let fp = spread_prime(q, path.kappa, dims.n);
                jac[(z, p)] += f * phase * x;
                jac[(z, np + p)] += path.h * (fp * phase + f * phase * dphase) * x;
                u[z] += path.h * f * phase * x;
            }
        }
    }
    Ok((u, jac))
}

/// `[I]_ij = 2 gamma sum_z Re(du_z/dtheta_i * conj(du_z/dtheta_j))`, with one
/// real slot per complex gain.
pub fn fisher_matrix(ch: &DDChannel, cfg: &FrameConfig, pilots: &[C64], gamma: f64, wf: Waveform) -> Result<DMatrix<f64>> {
    if !(gamma > 0.0) {
        return Err(crate::error::domain("noise precision must be positive"));
    }
    let (_, jac) = observation_jacobian(ch, cfg, pilots, wf)?;
    let g = jac.adjoint() * &jac;
    Ok(DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| 2.0 * gamma * g[(j, i)].re))
}

/// Diagonal of the inverse Fisher matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CrlbBounds {
    pub diag: Vec<f64>,
    pub rank: usize,
    /// True when the matrix was singular and a pseudo-inverse was used.
    pub pseudo: bool,
}

pub fn crlb_bounds(fim: &DMatrix<f64>) -> Result<CrlbBounds> {
    let n = fim.nrows();
    if fim.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: fim.ncols() });
    }
    let sym = (fim + fim.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        let inv = ch.inverse();
        return Ok(CrlbBounds { diag: (0..n).map(|i| inv[(i, i)]).collect(), rank: n, pseudo: false });
    }
    let svd = sym.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * n as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let inv = svd.pseudo_inverse(eps).map_err(|e| Error::Numerical(e.into()))?;
    Ok(CrlbBounds { diag: (0..n).map(|i| inv[(i, i)]).collect(), rank, pseudo: true })
}

/// Average normalised bounds `(sum of gain bounds / ||h||^2, sum of kappa bounds / ||kappa||^2)`.
pub fn normalized_bounds(bounds: &CrlbBounds, ch: &DDChannel) -> Result<(f64, f64)> {
    let p = ch.paths.len();
    if bounds.diag.len() != 2 * p {
        return Err(Error::DimensionMismatch { expected: 2 * p, got: bounds.diag.len() });
    }
    let hn: f64 = ch.paths.iter().map(|x| x.h.norm_sqr()).sum();
    let kn: f64 = ch.paths.iter().map(|x| x.kappa * x.kappa).sum();
    let hb: f64 = bounds.diag[..p].iter().sum();
    let kb: f64 = bounds.diag[p..].iter().sum();
    Ok((hb / hn, kb / kn))
}
