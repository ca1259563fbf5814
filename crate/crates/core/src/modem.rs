//! Symplectic finite Fourier transforms, rectangular-pulse time synthesis
//! and PAPR.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::domain;
use crate::grid::DDGrid;
use crate::kernels::GridDims;
use crate::{Error, Result, C64};

/// Time-frequency samples `X[n, m]`, stored at `n*M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TFGrid {
    dims: GridDims,
    data: Vec<C64>,
}

impl TFGrid {
    pub fn from_vec(dims: GridDims, data: Vec<C64>) -> Result<Self> {
        if data.len() != dims.mn() {
            return Err(Error::DimensionMismatch { expected: dims.mn(), got: data.len() });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.data[n * self.dims.m + m]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }
}

/// Plain O(L^2) DFT with a cached twiddle table.
struct Dft {
    tw: Vec<C64>,
}

impl Dft {
    fn new(len: usize) -> Self {
        Self { tw: (0..len).map(|i| C64::from_polar(1.0, 2.0 * PI * i as f64 / len as f64)).collect() }
    }

    /// `out[a] = sum_b inp[b] * exp(sign * j 2 pi a b / L)`
    fn run(&self, inp: &[C64], out: &mut [C64], sign: i32) {
        let len = self.tw.len();
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            let mut idx = 0usize;
            for v in inp {
                let w = if sign > 0 { self.tw[idx] } else { self.tw[(len - idx) % len] };
                acc += v * w;
                idx += a;
                if idx >= len {
                    idx %= len;
                }
            }
            *o = acc;
        }
    }
}

/// Separable 2-D transform from an (outer a, inner b) array into (outer c,
/// inner e), applying sign `s_outer` along the outer axis and `s_inner` along
/// the inner one.
fn transform2(inp: &[C64], outer: usize, inner: usize, s_outer: i32, s_inner: i32, scale: f64) -> Vec<C64> {
    let (fo, fi) = (Dft::new(outer), Dft::new(inner));
    let mut stage = vec![C64::new(0.0, 0.0); outer * inner];
    for a in 0..outer {
        fi.run(&inp[a * inner..(a + 1) * inner], &mut stage[a * inner..(a + 1) * inner], s_inner);
    }
    let mut col = vec![C64::new(0.0, 0.0); outer];
    let mut res = vec![C64::new(0.0, 0.0); outer];
    let mut out = vec![C64::new(0.0, 0.0); outer * inner];
    for e in 0..inner {
        for a in 0..outer {
            col[a] = stage[a * inner + e];
        }
        fo.run(&col, &mut res, s_outer);
        for c in 0..outer {
            out[c * inner + e] = res[c] * scale;
        }
    }
    out
}

/// `X[n, m] = (1/sqrt(MN)) sum_k sum_l x[k, l] exp(j 2 pi (nk/N - ml/M))`
pub fn isfft(x: &DDGrid) -> TFGrid {
    let dims = x.dims();
    let scale = 1.0 / libm::sqrt(dims.mn() as f64);
    TFGrid { dims, data: transform2(x.as_slice(), dims.n, dims.m, 1, -1, scale) }
}

/// Inverse of [`isfft`].
pub fn sfft(y: &TFGrid) -> DDGrid {
    let dims = y.dims;
    let scale = 1.0 / libm::sqrt(dims.mn() as f64);
    DDGrid::from_vec(dims, transform2(&y.data, dims.n, dims.m, -1, 1, scale)).expect("dims preserved")
}

/// Rectangular-pulse transmit samples: a unitary length-M inverse DFT per
/// time slot, slots concatenated.
pub fn to_time_rect(x: &TFGrid) -> Vec<C64> {
    let (m, n) = (x.dims.m, x.dims.n);
    let f = Dft::new(m);
    let scale = 1.0 / libm::sqrt(m as f64);
    let mut s = vec![C64::new(0.0, 0.0); m * n];
    for slot in 0..n {
        let out = &mut s[slot * m..(slot + 1) * m];
        f.run(&x.data[slot * m..(slot + 1) * m], out, 1);
        for v in out.iter_mut() {
            *v *= scale;
        }
    }
    s
}

/// Peak-to-average power ratio in dB.
pub fn papr(s: &[C64]) -> Result<f64> {
    let peak = s.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(domain("PAPR of an all-zero signal"));
    }
    let mean = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
    Ok(10.0 * libm::log10(peak / mean))
}
