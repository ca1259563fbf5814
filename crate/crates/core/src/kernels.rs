//! Fractional-Doppler spreading kernels and grid index helpers.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::{Result, C64};

/// Size of the delay-Doppler grid: `m` delay bins by `n` Doppler bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub m: usize,
    pub n: usize,
}

impl GridDims {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(domain("grid dimensions must be positive"));
        }
        Ok(Self { m, n })
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Position of cell (k, l) in the vectorised grid, `k*M + l`.
    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.m + l
    }

    #[inline]
    pub fn wrap_k(&self, k: i64) -> usize {
        wrap(k, self.n)
    }

    #[inline]
    pub fn wrap_l(&self, l: i64) -> usize {
        wrap(l, self.m)
    }
}

#[inline]
pub fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

// below this offset from a singularity the geometric series is summed directly
const SERIES_SWITCH: f64 = 1e-6;

/// Spreading of a path with fractional Doppler `kappa` onto Doppler offset `q`:
/// `(1/N) sum_{n<N} exp(j 2 pi n (q + kappa) / N)`.
pub fn spread_f(q: i64, kappa: f64, n: usize) -> Result<C64> {
    if n < 2 {
        return Err(domain("spreading function needs N >= 2"));
    }
    Ok(spread(q, kappa, n))
}

/// Reduce `q + kappa` to the period of the kernel, `[-N/2, N/2]`.
#[inline]
fn reduce(q: i64, kappa: f64, n: usize) -> f64 {
    let nf = n as f64;
    let s = q as f64 + kappa;
    s - nf * libm::round(s / nf)
}

pub(crate) fn spread(q: i64, kappa: f64, n: usize) -> C64 {
    let r = reduce(q, kappa, n);
    if r.abs() < SERIES_SWITCH {
        return spread_series(r, n);
    }
    let nf = n as f64;
    let mag = libm::sin(PI * r) / (nf * libm::sin(PI * r / nf));
    C64::from_polar(mag, PI * r * (nf - 1.0) / nf)
}

/// Term-by-term evaluation of the spreading sum at real offset `s`.
pub fn spread_series(s: f64, n: usize) -> C64 {
    let nf = n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        acc += C64::from_polar(1.0, 2.0 * PI * i as f64 * s / nf);
    }
    acc / nf
}

/// Derivative of the spreading function with respect to `kappa`.
pub(crate) fn spread_prime(q: i64, kappa: f64, n: usize) -> C64 {
    let r = reduce(q, kappa, n);
    let nf = n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 1..n {
        let w = 2.0 * PI * i as f64 / nf;
        acc += C64::new(0.0, w) * C64::from_polar(1.0, w * r);
    }
    acc / nf
}

#[inline]
fn dd_phase(t: usize, d: i64, kappa: f64, dims: GridDims) -> C64 {
    let mn = dims.mn() as f64;
    C64::from_polar(1.0, -2.0 * PI * t as f64 * (d as f64 + kappa) / mn)
}

fn check_td(t: usize, d: i64, dims: GridDims) -> Result<()> {
    if dims.n < 2 {
        return Err(domain("spreading function needs N >= 2"));
    }
    if t >= dims.m {
        return Err(domain("delay index outside the grid"));
    }
    if d.unsigned_abs() as usize > dims.n / 2 {
        return Err(domain("Doppler index exceeds N/2"));
    }
    Ok(())
}

/// `f(q, kappa)` rotated by the delay-Doppler phase `exp(-j 2 pi t (d + kappa) / MN)`.
pub fn phi(q: i64, kappa: f64, t: usize, d: i64, dims: GridDims) -> Result<C64> {
    check_td(t, d, dims)?;
    Ok(phi_raw(q, kappa, t, d, dims))
}

/// Derivative of [`phi`] with respect to `kappa`.
pub fn phi_prime(q: i64, kappa: f64, t: usize, d: i64, dims: GridDims) -> Result<C64> {
    check_td(t, d, dims)?;
    Ok(phi_prime_raw(q, kappa, t, d, dims))
}

#[inline]
pub(crate) fn phi_raw(q: i64, kappa: f64, t: usize, d: i64, dims: GridDims) -> C64 {
    spread(q, kappa, dims.n) * dd_phase(t, d, kappa, dims)
}

pub(crate) fn phi_prime_raw(q: i64, kappa: f64, t: usize, d: i64, dims: GridDims) -> C64 {
    let ph = dd_phase(t, d, kappa, dims);
    let f = spread(q, kappa, dims.n);
    let w = -2.0 * PI * t as f64 / dims.mn() as f64;
    C64::new(0.0, w) * f * ph + ph * spread_prime(q, kappa, dims.n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn integer_doppler_is_a_delta() {
        assert!(close(spread_f(0, 0.0, 32).unwrap(), C64::new(1.0, 0.0), 1e-14));
        assert!(close(spread_f(3, 0.0, 32).unwrap(), C64::new(0.0, 0.0), 1e-14));
        assert!(close(spread_f(32, 0.0, 32).unwrap(), C64::new(1.0, 0.0), 1e-14));
    }

    #[test]
    fn golden_fractional_value() {
        // brute-force sum of 32 terms
        let mut want = C64::new(0.0, 0.0);
        for i in 0..32 {
            want += C64::from_polar(1.0, 2.0 * PI * i as f64 * 0.3 / 32.0);
        }
        want /= 32.0;
        let got = spread_f(0, 0.3, 32).unwrap();
        assert!(close(got, want, 1e-13));
        assert!((got.re - 0.524_858_644_284).abs() < 1e-11, "{got}");
        assert!((got.im - 0.679_394_013_781).abs() < 1e-11, "{got}");
    }

    #[test]
    fn rejects_tiny_n() {
        assert!(spread_f(0, 0.1, 1).is_err());
        assert!(GridDims::new(0, 4).is_err());
    }

    #[test]
    fn phi_examples() {
        let dims = GridDims::new(128, 32).unwrap();
        assert!(close(phi(0, 0.0, 0, 2, dims).unwrap(), C64::new(1.0, 0.0), 1e-14));
        let want = C64::from_polar(1.0, -2.0 * PI * 15.0 / 4096.0);
        assert!(close(phi(0, 0.0, 5, 3, dims).unwrap(), want, 1e-14));
        let f = spread_series(1.25, 32);
        let ph = C64::from_polar(1.0, -2.0 * PI * 2.0 * (-1.0 + 0.25) / 4096.0);
        assert!(close(phi(1, 0.25, 2, -1, dims).unwrap(), f * ph, 1e-13));
        assert!(phi(0, 0.0, 128, 0, dims).is_err());
        assert!(phi(0, 0.0, 0, 17, dims).is_err());
    }

    #[test]
    fn phi_prime_at_origin() {
        let dims = GridDims::new(128, 32).unwrap();
        let mut want = C64::new(0.0, 0.0);
        for i in 1..32 {
            want += C64::new(0.0, 2.0 * PI * i as f64 / 32.0);
        }
        want /= 32.0;
        assert!(close(phi_prime(0, 0.0, 0, 0, dims).unwrap(), want, 1e-12));
    }

    #[test]
    fn phi_prime_continuous_at_singularity() {
        let dims = GridDims::new(128, 32).unwrap();
        let a = phi_prime(0, 1e-7, 3, 1, dims).unwrap();
        let b = phi_prime(0, -1e-7, 3, 1, dims).unwrap();
        assert!((a - b).norm() < 1e-5);
    }

    #[test]
    fn kernel_near_singularity_matches_series() {
        for &eps in &[1e-3, 1e-5, 2e-6, 9e-7, 1e-9] {
            for q in [-32i64, 0, 32] {
                let got = spread(q, eps, 32);
                let want = spread_series(q as f64 + eps, 32);
                assert!(close(got, want, 1e-12), "q={q} eps={eps}");
            }
        }
    }
}
