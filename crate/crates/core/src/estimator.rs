//! Structured sparse message-passing estimator for path gains and
//! fractional Doppler shifts.
//!
//! The coefficient vector `c` splits into blocks `c_j = h_j * g_j`, one per
//! candidate (delay t, Doppler d) cell, with `g_jb = phi(q_b, kappa_j, t, d)`.
//! A Gaussian posterior over `c` given the dictionary feeds per-element
//! extrinsic messages to the gain and Doppler variables; the gains carry a
//! sparsity-promoting Gaussian-Gamma prior and each `kappa_j` is tracked
//! through a first-order expansion of `phi` around the previous estimate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{build_sparse, ChannelPath, DDChannel};
use crate::frame::SparseSystem;
use crate::kernels::{phi_prime_raw, phi_raw, GridDims};
use crate::sparse::SparseMatrix;
use crate::{Error, Result, Waveform, C64};

const VMIN: f64 = 1e-12;
const VMAX: f64 = 1e12;
const GAMMA_CAP: f64 = 1e12;
const G_FLOOR: f64 = 1e-8;
const DERIV_FLOOR: f64 = 1e-12;
// variance of a uniform law on [-0.5, 0.5]
const KAPPA_VAR_CAP: f64 = 1.0 / 12.0;

/// Tuning knobs of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Gamma shape-side parameter of the gain precision prior.
    pub epsilon: f64,
    /// Gamma rate-side parameter of the gain precision prior.
    pub eta: f64,
    pub max_iter: usize,
    /// Relative change of the stacked (h, kappa) estimates that stops the loop.
    pub tol: f64,
    /// Weight of the new backward `c` message; 1 disables damping.
    pub damping: f64,
    /// Support threshold relative to the strongest block power.
    pub support_rho: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { epsilon: 1.0, eta: 0.0, max_iter: 50, tol: 1e-6, damping: 1.0, support_rho: 1e-3 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !(self.eta >= 0.0) {
            return Err(crate::error::domain("epsilon and eta must be non-negative"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(crate::error::domain("damping must lie in (0, 1]"));
        }
        if self.max_iter == 0 {
            return Err(crate::error::domain("max_iter must be positive"));
        }
        Ok(())
    }
}

type SparseCols = Vec<Vec<(usize, C64)>>;

fn sparse_cols(x: &DMatrix<C64>) -> SparseCols {
    (0..x.ncols())
        .map(|n| x.column(n).iter().enumerate().filter(|(_, v)| v.norm_sqr() != 0.0).map(|(z, v)| (z, *v)).collect())
        .collect()
}

/// Every message and belief the estimator carries between iterations.
/// Per-element vectors have length `J*B`, per-block ones length `J`.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub c_bar: Vec<C64>,
    pub v_bar: Vec<f64>,
    pub c_post: Vec<C64>,
    pub v_post: Vec<f64>,
    pub c_fwd: Vec<C64>,
    pub v_fwd: Vec<f64>,
    pub gamma: f64,
    pub h_fwd: Vec<C64>,
    pub vh_fwd: Vec<f64>,
    pub h_hat: Vec<C64>,
    pub v_h: Vec<f64>,
    pub lambda: Vec<f64>,
    pub h_bwd: Vec<C64>,
    pub vh_bwd: Vec<f64>,
    pub g_fwd: Vec<C64>,
    pub vg_fwd: Vec<f64>,
    pub kappa_fwd: Vec<f64>,
    pub vk_fwd: Vec<f64>,
    pub kappa: Vec<f64>,
    pub v_kappa: Vec<f64>,
    pub kappa_prev: Vec<f64>,
    pub kappa_bwd: Vec<f64>,
    pub vk_bwd: Vec<f64>,
    pub g_bar: Vec<C64>,
    pub vg_bar: Vec<f64>,
    pub g_hat: Vec<C64>,
    pub v_g: Vec<f64>,
    pub iterations: usize,
    frozen: bool,
    j: usize,
    b: usize,
    base: SparseCols,
    cols: SparseCols,
    rows_l: Vec<usize>,
}

impl EstimatorState {
    pub fn blocks(&self) -> usize {
        self.j
    }

    pub fn block_len(&self) -> usize {
        self.b
    }

    /// Current dictionary column `n` as (row, value) pairs.
    pub fn column(&self, n: usize) -> &[(usize, C64)] {
        &self.cols[n]
    }
}

/// Initial messages: zero-mean unit-variance backward `c`, unit precisions,
/// all fractional Doppler estimates at zero.
pub fn init_state(sys: &SparseSystem, hp: &Hyperparams) -> Result<EstimatorState> {
    init_inner(sys, hp, false)
}

fn init_inner(sys: &SparseSystem, hp: &Hyperparams, frozen: bool) -> Result<EstimatorState> {
    hp.validate()?;
    if sys.y.is_empty() {
        return Err(crate::error::domain("empty observation"));
    }
    let (j, b) = (sys.cfg.j(), sys.b());
    if sys.x.nrows() != sys.y.len() || sys.x.ncols() != j * b {
        return Err(Error::DimensionMismatch { expected: j * b, got: sys.x.ncols() });
    }
    let jb = j * b;
    let zero = C64::new(0.0, 0.0);
    let mut g_bar = vec![zero; jb];
    for jj in 0..j {
        let (t, d) = sys.cfg.block_td(jj);
        for bi in 0..b {
            g_bar[jj * b + bi] = phi_raw(bi as i64 - sys.q_half as i64, 0.0, t, d, sys.dims);
        }
    }
    let cols = sparse_cols(&sys.x);
    let base = if sys.waveform == Waveform::Rect { sparse_cols(&sys.base_dictionary()?) } else { cols.clone() };
    Ok(EstimatorState {
        c_bar: vec![zero; jb],
        v_bar: vec![1.0; jb],
        c_post: vec![zero; jb],
        v_post: vec![1.0; jb],
        c_fwd: vec![zero; jb],
        v_fwd: vec![VMAX; jb],
        gamma: 1.0,
        h_fwd: vec![zero; jb],
        vh_fwd: vec![VMAX; jb],
        h_hat: vec![zero; j],
        v_h: vec![1.0; j],
        lambda: vec![1.0; j],
        h_bwd: vec![zero; jb],
        vh_bwd: vec![VMAX; jb],
        g_fwd: vec![zero; jb],
        vg_fwd: vec![VMAX; jb],
        kappa_fwd: vec![0.0; jb],
        vk_fwd: vec![VMAX; jb],
        kappa: vec![0.0; j],
        v_kappa: vec![KAPPA_VAR_CAP; j],
        kappa_prev: vec![0.0; j],
        kappa_bwd: vec![0.0; jb],
        vk_bwd: vec![KAPPA_VAR_CAP; jb],
        g_hat: g_bar.clone(),
        v_g: vec![VMIN; jb],
        g_bar,
        vg_bar: vec![VMIN; jb],
        iterations: 0,
        frozen,
        j,
        b,
        base,
        cols,
        rows_l: sys.cfg.window(sys.dims).into_iter().map(|(_, l)| l).collect(),
    })
}

#[inline]
fn clamp_var(v: f64) -> f64 {
    if v.is_nan() || v > VMAX {
        VMAX
    } else if v < VMIN {
        VMIN
    } else {
        v
    }
}

/// Divide a Gaussian belief by one of its incoming messages.
#[inline]
fn extrinsic_c(mp: C64, vp: f64, mm: C64, vm: f64) -> (C64, f64) {
    let prec = 1.0 / vp - 1.0 / vm;
    if prec > 1.0 / VMAX {
        let v = 1.0 / prec;
        (v * (mp / vp - mm / vm), clamp_var(v))
    } else {
        (mp, VMAX)
    }
}

#[inline]
fn extrinsic_r(mp: f64, vp: f64, mm: f64, vm: f64) -> (f64, f64) {
    let prec = 1.0 / vp - 1.0 / vm;
    if prec > 1.0 / VMAX {
        let v = 1.0 / prec;
        (v * (mp / vp - mm / vm), clamp_var(v))
    } else {
        (mp, VMAX)
    }
}

/// One pass of the message schedule.
pub fn iterate_once(state: &mut EstimatorState, sys: &SparseSystem, hp: &Hyperparams) -> Result<()> {
    let (jn, b) = (state.j, state.b);
    let z = sys.y.len();
    let dims = sys.dims;
    let q_half = (b / 2) as i64;
    state.kappa_prev.clone_from(&state.kappa);

    // posterior of c, through the observation-space form of the inverse
    let mut s = DMatrix::<C64>::zeros(z, z);
    for i in 0..z {
        s[(i, i)] = C64::new(1.0 / state.gamma, 0.0);
    }
    for (col, &v) in state.cols.iter().zip(&state.v_bar) {
        for &(r1, x1) in col {
            for &(r2, x2) in col {
                s[(r1, r2)] += x1 * x2.conj() * v;
            }
        }
    }
    let chol = s.cholesky().ok_or_else(|| Error::Numerical("observation covariance is not positive definite".into()))?;
    let si = chol.inverse();
    let mut resid = sys.y.clone();
    for (col, c) in state.cols.iter().zip(&state.c_bar) {
        for &(r, x) in col {
            resid[r] -= x * c;
        }
    }
    let sr: Vec<C64> = (0..z).map(|r| (0..z).map(|c| si[(r, c)] * resid[c]).sum()).collect();
    let mut w = vec![0.0; jn * b];
    let mut u = vec![C64::new(0.0, 0.0); jn * b];
    for (n, col) in state.cols.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for &(r1, x1) in col {
            for &(r2, x2) in col {
                acc += x1.conj() * si[(r1, r2)] * x2;
            }
            u[n] += x1.conj() * sr[r1];
        }
        w[n] = acc.re;
    }
    let mut trace = 0.0;
    for n in 0..jn * b {
        let vb = state.v_bar[n];
        state.c_post[n] = state.c_bar[n] + u[n] * vb;
        state.v_post[n] = clamp_var(vb - vb * vb * w[n]);
        trace += vb * w[n];
    }
    let mut rr = sys.y.clone();
    for (col, c) in state.cols.iter().zip(&state.c_post) {
        for &(r, x) in col {
            rr[r] -= x * c;
        }
    }
    let rnorm: f64 = rr.iter().map(|v| v.norm_sqr()).sum();
    let denom = rnorm + trace / state.gamma;
    state.gamma = if denom > 0.0 { (z as f64 / denom).min(GAMMA_CAP) } else { GAMMA_CAP };

    // extrinsic c, then forward gain messages
    for n in 0..jn * b {
        if w[n] > 1.0 / VMAX {
            state.v_fwd[n] = clamp_var(1.0 / w[n] - state.v_bar[n]);
            state.c_fwd[n] = state.c_bar[n] + u[n] / w[n];
        } else {
            state.v_fwd[n] = VMAX;
            state.c_fwd[n] = C64::new(0.0, 0.0);
        }
        let g = state.g_bar[n];
        if g.norm() > G_FLOOR {
            state.h_fwd[n] = state.c_fwd[n] / g;
            state.vh_fwd[n] = clamp_var(state.v_fwd[n] / g.norm_sqr());
        } else {
            state.h_fwd[n] = C64::new(0.0, 0.0);
            state.vh_fwd[n] = VMAX;
        }
    }

    // gain beliefs and precision hyperparameters
    for j in 0..jn {
        let span = j * b..(j + 1) * b;
        let prec: f64 = state.vh_fwd[span.clone()].iter().map(|v| 1.0 / v).sum();
        let vq = 1.0 / prec;
        let qh: C64 = span.clone().map(|n| state.h_fwd[n] / state.vh_fwd[n]).sum::<C64>() * vq;
        let belief = |lam: f64| (qh / (1.0 + vq * lam), 1.0 / (1.0 / vq + lam));
        let (h0, v0) = belief(state.lambda[j]);
        state.lambda[j] = (hp.epsilon + 1.0) / (hp.eta + h0.norm_sqr() + v0);
        let (h1, v1) = belief(state.lambda[j]);
        state.h_hat[j] = h1;
        state.v_h[j] = v1;
        let den = h1.norm_sqr() + v1;
        for n in span {
            let (m, v) = extrinsic_c(h1, v1, state.h_fwd[n], state.vh_fwd[n]);
            state.h_bwd[n] = m;
            state.vh_bwd[n] = v;
            state.g_fwd[n] = state.c_fwd[n] * h1.conj() / den;
            state.vg_fwd[n] = clamp_var(state.v_fwd[n] / den);
        }
    }

    // fractional Doppler through the linearised phi
    for j in 0..jn {
        let (t, d) = sys.cfg.block_td(j);
        let kp = state.kappa_prev[j];
        let span = j * b..(j + 1) * b;
        if state.frozen {
            for (bi, n) in span.enumerate() {
                state.g_bar[n] = phi_raw(bi as i64 - q_half, 0.0, t, d, dims);
                state.vg_bar[n] = VMIN;
            }
            continue;
        }
        let ph: Vec<C64> = (0..b).map(|bi| phi_raw(bi as i64 - q_half, kp, t, d, dims)).collect();
        let pp: Vec<C64> = (0..b).map(|bi| phi_prime_raw(bi as i64 - q_half, kp, t, d, dims)).collect();
        let mut prec_sum = 0.0;
        let mut mean_sum = 0.0;
        for (bi, n) in span.clone().enumerate() {
            let (p0, p1) = (ph[bi], pp[bi]);
            let gf = state.g_fwd[n];
            let mut prec = 0.0;
            let mut acc = 0.0;
            for (dp, gpart, ppart) in [(p1.re, gf.re, p0.re), (p1.im, gf.im, p0.im)] {
                if dp.abs() > DERIV_FLOOR {
                    let m = (gpart - ppart + dp * kp) / dp;
                    let pr = 2.0 * dp * dp / state.vg_fwd[n];
                    prec += pr;
                    acc += pr * m;
                }
            }
            if prec > 0.0 {
                state.vk_fwd[n] = clamp_var(1.0 / prec);
                state.kappa_fwd[n] = acc / prec;
            } else {
                state.vk_fwd[n] = VMAX;
                state.kappa_fwd[n] = 0.0;
            }
            prec_sum += 1.0 / state.vk_fwd[n];
            mean_sum += state.kappa_fwd[n] / state.vk_fwd[n];
        }
        let vk = (1.0 / prec_sum).min(KAPPA_VAR_CAP);
        let raw = mean_sum / prec_sum;
        let clipped = raw.abs() >= 0.5;
        let kh = raw.clamp(-0.5, 0.5);
        state.kappa[j] = kh;
        state.v_kappa[j] = vk;
        for (bi, n) in span.enumerate() {
            let (mut m, mut v) = extrinsic_r(kh, vk, state.kappa_fwd[n], state.vk_fwd[n]);
            v = v.min(KAPPA_VAR_CAP);
            m = m.clamp(-0.5, 0.5);
            if clipped {
                m = kh;
                v = VMIN;
            }
            state.kappa_bwd[n] = m;
            state.vk_bwd[n] = v;
            state.g_bar[n] = ph[bi] + pp[bi] * (m - kp);
            state.vg_bar[n] = clamp_var(v * pp[bi].norm_sqr());
        }
    }

    // g beliefs and the new backward c messages
    let damp = hp.damping;
    for n in 0..jn * b {
        let (gb, vgb, gf, vgf) = (state.g_bar[n], state.vg_bar[n], state.g_fwd[n], state.vg_fwd[n]);
        let v = 1.0 / (1.0 / vgb + 1.0 / vgf);
        state.v_g[n] = v;
        state.g_hat[n] = (gb / vgb + gf / vgf) * v;
        let (hb, vhb) = (state.h_bwd[n], state.vh_bwd[n]);
        let c_new = hb * gb;
        let v_new = clamp_var(hb.norm_sqr() * vgb + gb.norm_sqr() * vhb + vhb * vgb);
        state.c_bar[n] = c_new * damp + state.c_bar[n] * (1.0 - damp);
        state.v_bar[n] = clamp_var(v_new * damp + state.v_bar[n] * (1.0 - damp));
    }

    if sys.waveform == Waveform::Rect && !state.frozen {
        refresh_rect(state, sys);
    }
    state.iterations += 1;
    Ok(())
}

/// Re-rotate the dictionary with the current fractional Doppler estimates.
fn refresh_rect(state: &mut EstimatorState, sys: &SparseSystem) {
    let mn = sys.dims.mn() as f64;
    for (n, (col, base)) in state.cols.iter_mut().zip(&state.base).enumerate() {
        let j = n / state.b;
        let (_, d) = sys.cfg.block_td(j);
        let nu = d as f64 + state.kappa[j];
        for (dst, &(r, v)) in col.iter_mut().zip(base) {
            *dst = (r, v * C64::from_polar(1.0, 2.0 * PI * state.rows_l[r] as f64 * nu / mn));
        }
    }
}

/// Final beliefs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub h_hat: Vec<C64>,
    pub v_h: Vec<f64>,
    pub kappa_hat: Vec<f64>,
    pub gamma_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Spreading half-width the estimate models.
    pub n_hat: usize,
}

fn rel_change(h: &[C64], k: &[f64], h0: &[C64], k0: &[f64]) -> f64 {
    let num: f64 = h.iter().zip(h0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
        + k.iter().zip(k0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let den: f64 = h0.iter().map(|v| v.norm_sqr()).sum::<f64>() + k0.iter().map(|v| v * v).sum::<f64>();
    if den > 0.0 {
        libm::sqrt(num / den)
    } else {
        f64::INFINITY
    }
}

fn run(mut state: EstimatorState, sys: &SparseSystem, hp: &Hyperparams) -> Result<EstimateResult> {
    let mut converged = false;
    for _ in 0..hp.max_iter {
        let (h0, k0) = (state.h_hat.clone(), state.kappa.clone());
        iterate_once(&mut state, sys, hp)?;
        if state.iterations > 1 && rel_change(&state.h_hat, &state.kappa, &h0, &k0) < hp.tol {
            converged = true;
            break;
        }
    }
    if state.h_hat.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("non-finite gain estimate".into()));
    }
    Ok(EstimateResult {
        h_hat: state.h_hat,
        v_h: state.v_h,
        kappa_hat: state.kappa,
        gamma_hat: state.gamma,
        iterations: state.iterations,
        converged,
        n_hat: state.b / 2,
    })
}

/// Joint estimation of gains and fractional Doppler shifts.
pub fn estimate(sys: &SparseSystem, hp: &Hyperparams) -> Result<EstimateResult> {
    run(init_state(sys, hp)?, sys, hp)
}

/// Ablation that assumes integer Doppler: fractional parts stay at zero
/// and only the `q = 0` column of every block is modelled.
pub fn estimate_integer_doppler(sys: &SparseSystem, hp: &Hyperparams) -> Result<EstimateResult> {
    let sys0 = sys.integer_only()?;
    run(init_inner(&sys0, hp, true)?, &sys0, hp)
}

/// Blocks whose gain power reaches `rho` times the strongest one.
pub fn detect_support(res: &EstimateResult, sys: &SparseSystem, rho: f64) -> Result<Vec<ChannelPath>> {
    let peak = res.h_hat.iter().map(|h| h.norm_sqr()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptySupport);
    }
    let paths: Vec<ChannelPath> = res
        .h_hat
        .iter()
        .enumerate()
        .filter(|(_, h)| h.norm_sqr() >= rho * peak)
        .map(|(j, h)| {
            let (t, d) = sys.cfg.block_td(j);
            ChannelPath { h: *h, l: t, k: d, kappa: res.kappa_hat[j] }
        })
        .collect();
    if paths.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(paths)
}

/// Effective channel matrix implied by a list of estimated paths.
pub fn reconstruct_channel(paths: &[ChannelPath], dims: GridDims, n_hat: usize, wf: Waveform) -> Result<SparseMatrix> {
    let ch = DDChannel::new(paths.to_vec(), n_hat, dims)?;
    Ok(build_sparse(&ch, wf))
}
