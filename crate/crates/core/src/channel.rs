//! Sparse delay-Doppler channels with fractional Doppler.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::domain;
use crate::grid::DDGrid;
use crate::kernels::{spread, wrap, GridDims};
use crate::sparse::{SparseMatrix, DENSE_LIMIT};
use crate::{Error, Result, Waveform, C64};

/// One propagation path: gain, integer delay/Doppler taps and fractional Doppler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub h: C64,
    pub l: usize,
    pub k: i64,
    pub kappa: f64,
}

impl ChannelPath {
    /// Physical delay in seconds for subcarrier spacing `df`.
    pub fn delay_s(&self, dims: GridDims, df: f64) -> f64 {
        self.l as f64 / (dims.m as f64 * df)
    }

    /// Physical Doppler shift in Hz for subcarrier spacing `df` (T = 1/df).
    pub fn doppler_hz(&self, dims: GridDims, df: f64) -> f64 {
        (self.k as f64 + self.kappa) * df / dims.n as f64
    }
}

/// A set of paths sharing the Doppler truncation `n_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct DDChannel {
    pub paths: Vec<ChannelPath>,
    pub n_hat: usize,
    pub dims: GridDims,
}

impl DDChannel {
    pub fn new(paths: Vec<ChannelPath>, n_hat: usize, dims: GridDims) -> Result<Self> {
        if dims.n < 2 {
            return Err(domain("channel needs N >= 2"));
        }
        for (i, p) in paths.iter().enumerate() {
            if !(p.kappa.abs() <= 0.5) {
                return Err(domain("fractional Doppler outside [-0.5, 0.5]"));
            }
            if p.l >= dims.m || p.k.unsigned_abs() as usize > dims.n / 2 {
                return Err(domain("path tap outside the grid"));
            }
            if paths[..i].iter().any(|o| o.l == p.l && o.k == p.k) {
                return Err(domain("two paths share a delay-Doppler cell"));
            }
        }
        Ok(Self { paths, n_hat, dims })
    }

    /// Iterate `(path, q, f(q, kappa))` over the truncated spreading window.
    fn terms(&self) -> impl Iterator<Item = (&ChannelPath, i64, C64)> + '_ {
        let nh = self.n_hat as i64;
        self.paths
            .iter()
            .flat_map(move |p| (-nh..=nh).map(move |q| (p, q, spread(q, p.kappa, self.dims.n))))
    }

    pub fn energy(&self) -> f64 {
        self.paths.iter().map(|p| p.h.norm_sqr()).sum()
    }
}

/// Draw a random channel: the first path sits at delay 0, later ones at
/// delays in `[1, l_max]`; Doppler taps are uniform in `[-k_max, k_max]`,
/// fractional parts uniform in `[-0.5, 0.5]` and gains CN(0, 1/P).
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    p: usize,
    l_max: usize,
    k_max: usize,
    n_hat: usize,
    dims: GridDims,
) -> Result<DDChannel> {
    if p == 0 {
        return Err(domain("at least one path is required"));
    }
    if l_max >= dims.m || k_max > dims.n / 2 {
        return Err(domain("tap limits exceed the grid"));
    }
    let available = 1 + l_max * (2 * k_max + 1);
    if p > available {
        return Err(Error::TooManyPaths { requested: p, available });
    }
    let sd = libm::sqrt(0.5 / p as f64);
    let mut paths: Vec<ChannelPath> = Vec::with_capacity(p);
    while paths.len() < p {
        let l = if paths.is_empty() { 0 } else { rng.random_range(1..=l_max) };
        let k = rng.random_range(-(k_max as i64)..=k_max as i64);
        if paths.iter().any(|o| o.l == l && o.k == k) {
            continue;
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let kappa = rng.random_range(-0.5..=0.5);
        paths.push(ChannelPath { h: C64::new(re * sd, im * sd), l, k, kappa });
    }
    DDChannel::new(paths, n_hat, dims)
}

#[inline]
fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

/// Coefficient of the bi-orthogonal model for one (path, q) term.
#[inline]
fn bi_coef(p: &ChannelPath, f: C64, dims: GridDims) -> C64 {
    p.h * f * cis(-2.0 * PI * p.l as f64 * (p.k as f64 + p.kappa) / dims.mn() as f64)
}

/// Rectangular-pulse coefficient at output delay `l`, source Doppler `kp`.
#[inline]
fn rect_coef(p: &ChannelPath, f: C64, l: usize, kp: usize, dims: GridDims) -> C64 {
    let dl = l as f64 - p.l as f64;
    let phase = cis(2.0 * PI * dl * (p.k as f64 + p.kappa) / dims.mn() as f64);
    let alpha = if l >= p.l {
        f
    } else {
        (f - 1.0 / dims.n as f64) * cis(-2.0 * PI * kp as f64 / dims.n as f64)
    };
    p.h * phase * alpha
}

/// Noiseless output of the bi-orthogonal channel, by direct summation.
pub fn apply_bi(ch: &DDChannel, x: &DDGrid) -> Result<DDGrid> {
    let dims = ch.dims;
    x.check_dims(dims)?;
    let mut y = DDGrid::zeros(dims);
    for (p, q, f) in ch.terms() {
        let c = bi_coef(p, f, dims);
        for k in 0..dims.n {
            let kp = wrap(k as i64 - p.k + q, dims.n);
            for l in 0..dims.m {
                let lp = wrap(l as i64 - p.l as i64, dims.m);
                let i = dims.index(k, l);
                y.as_mut_slice()[i] += c * x.get(kp, lp);
            }
        }
    }
    Ok(y)
}

/// Noiseless output of the rectangular-pulse channel, by direct summation.
pub fn apply_rect(ch: &DDChannel, x: &DDGrid) -> Result<DDGrid> {
    let dims = ch.dims;
    x.check_dims(dims)?;
    let mut y = DDGrid::zeros(dims);
    for (p, q, f) in ch.terms() {
        for k in 0..dims.n {
            let kp = wrap(k as i64 - p.k + q, dims.n);
            for l in 0..dims.m {
                let lp = wrap(l as i64 - p.l as i64, dims.m);
                let i = dims.index(k, l);
                y.as_mut_slice()[i] += rect_coef(p, f, l, kp, dims) * x.get(kp, lp);
            }
        }
    }
    Ok(y)
}

pub fn apply(ch: &DDChannel, x: &DDGrid, wf: Waveform) -> Result<DDGrid> {
    match wf {
        Waveform::Bi => apply_bi(ch, x),
        Waveform::Rect => apply_rect(ch, x),
    }
}

/// Cyclic shift `S` with `(S v)[i] = v[i - s]`.
fn shift_matrix(n: usize, s: i64) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, wrap(i as i64 - s, n))] = C64::new(1.0, 0.0);
    }
    a
}

fn check_dense(dims: GridDims) -> Result<()> {
    if dims.mn() > DENSE_LIMIT {
        return Err(Error::TooLarge(dims.mn()));
    }
    Ok(())
}

/// Dense bi-orthogonal channel matrix as a sum of Kronecker products of
/// cyclic Doppler and delay shifts.
pub fn build_h_bi(ch: &DDChannel) -> Result<DMatrix<C64>> {
    let dims = ch.dims;
    check_dense(dims)?;
    let mut h = DMatrix::zeros(dims.mn(), dims.mn());
    for (p, q, f) in ch.terms() {
        let dop = shift_matrix(dims.n, p.k - q);
        let del = shift_matrix(dims.m, p.l as i64) * bi_coef(p, f, dims);
        h += dop.kronecker(&del);
    }
    Ok(h)
}

/// Dense rectangular-pulse channel matrix.
///
/// Rows at or past the path delay carry `f` and the delay phase; the
/// wrapped rows carry `f - 1/N` and an extra rotation set by the source
/// Doppler block, which enters as a diagonal on the right of the Doppler shift.
pub fn build_h_rect(ch: &DDChannel) -> Result<DMatrix<C64>> {
    let dims = ch.dims;
    check_dense(dims)?;
    let (m, n) = (dims.m, dims.n);
    let mn = dims.mn() as f64;
    let psi = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| {
        cis(-2.0 * PI * k as f64 / n as f64)
    }));
    let mut h = DMatrix::zeros(dims.mn(), dims.mn());
    for (p, q, f) in ch.terms() {
        let nu = p.k as f64 + p.kappa;
        let head = p.h * cis(-2.0 * PI * p.l as f64 * nu / mn);
        let mut upper = nalgebra::DVector::zeros(m);
        let mut lower = nalgebra::DVector::zeros(m);
        for l in 0..m {
            let rot = cis(2.0 * PI * l as f64 * nu / mn) * head;
            if l >= p.l {
                upper[l] = rot * f;
            } else {
                lower[l] = rot * (f - 1.0 / n as f64);
            }
        }
        let del = shift_matrix(m, p.l as i64);
        let dop = shift_matrix(n, p.k - q);
        h += dop.kronecker(&(DMatrix::from_diagonal(&upper) * &del));
        if p.l > 0 {
            h += (dop * &psi).kronecker(&(DMatrix::from_diagonal(&lower) * &del));
        }
    }
    Ok(h)
}

pub fn build_h(ch: &DDChannel, wf: Waveform) -> Result<DMatrix<C64>> {
    match wf {
        Waveform::Bi => build_h_bi(ch),
        Waveform::Rect => build_h_rect(ch),
    }
}

/// Effective channel matrix in sparse form, usable at any grid size.
pub fn build_sparse(ch: &DDChannel, wf: Waveform) -> SparseMatrix {
    let dims = ch.dims;
    let mut trip = Vec::with_capacity(ch.paths.len() * (2 * ch.n_hat + 1) * dims.mn());
    for (p, q, f) in ch.terms() {
        let c = bi_coef(p, f, dims);
        for k in 0..dims.n {
            let kp = wrap(k as i64 - p.k + q, dims.n);
            for l in 0..dims.m {
                let lp = wrap(l as i64 - p.l as i64, dims.m);
                let v = match wf {
                    Waveform::Bi => c,
                    Waveform::Rect => rect_coef(p, f, l, kp, dims),
                };
                trip.push((dims.index(k, l), dims.index(kp, lp), v));
            }
        }
    }
    SparseMatrix::from_triplets(dims.mn(), trip)
}

/// Add circular complex Gaussian noise of variance `1/gamma` per sample.
/// An infinite `gamma` leaves the grid untouched.
pub fn add_noise<R: Rng + ?Sized>(y: &DDGrid, gamma: f64, rng: &mut R) -> Result<DDGrid> {
    if !(gamma > 0.0) {
        return Err(domain("noise precision must be positive"));
    }
    let mut out = y.clone();
    if gamma.is_infinite() {
        return Ok(out);
    }
    let sd = libm::sqrt(0.5 / gamma);
    for v in out.as_mut_slice() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += C64::new(re * sd, im * sd);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(m: usize, n: usize) -> GridDims {
        GridDims::new(m, n).unwrap()
    }

    fn random_grid(d: GridDims, rng: &mut ChaCha8Rng) -> DDGrid {
        let v = (0..d.mn()).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        DDGrid::from_vec(d, v).unwrap()
    }

    fn unit(l: usize, k: i64, kappa: f64, n_hat: usize, d: GridDims) -> DDChannel {
        DDChannel::new(vec![ChannelPath { h: C64::new(1.0, 0.0), l, k, kappa }], n_hat, d).unwrap()
    }

    #[test]
    fn identity_channel() {
        let d = dims(16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_grid(d, &mut rng);
        let ch = unit(0, 0, 0.0, 2, d);
        for y in [apply_bi(&ch, &x).unwrap(), apply_rect(&ch, &x).unwrap()] {
            for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
                assert!((a - b).norm() < 1e-14);
            }
        }
        let eye = DMatrix::<C64>::identity(d.mn(), d.mn());
        assert!((build_h_bi(&ch).unwrap() - &eye).norm() < 1e-13);
        assert!((build_h_rect(&ch).unwrap() - &eye).norm() < 1e-13);
    }

    #[test]
    fn integer_path_is_a_scaled_shift() {
        let d = dims(16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_grid(d, &mut rng);
        let y = apply_bi(&unit(2, 1, 0.0, 1, d), &x).unwrap();
        let s = cis(-2.0 * PI * 2.0 / 128.0);
        for k in 0..8 {
            for l in 0..16 {
                let want = s * x.get((k + 7) % 8, (l + 14) % 16);
                assert!((y.get(k, l) - want).norm() < 1e-13);
            }
        }
        let h = build_h_bi(&unit(2, 1, 0.0, 1, d)).unwrap();
        let nz = h.iter().filter(|v| v.norm() > 1e-12).count();
        assert_eq!(nz, d.mn());
        assert!(h.iter().filter(|v| v.norm() > 1e-12).all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rect_matches_bi_up_to_phase_past_the_delay() {
        let d = dims(16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_grid(d, &mut rng);
        let ch = unit(3, -2, 0.31, 2, d);
        let yb = apply_bi(&ch, &x).unwrap();
        let yr = apply_rect(&ch, &x).unwrap();
        for k in 0..8 {
            for l in 3..16 {
                let rot = cis(2.0 * PI * l as f64 * (-2.0 + 0.31) / 128.0);
                assert!((yr.get(k, l) - yb.get(k, l) * rot).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rect_pattern_matches_bi_for_integer_doppler() {
        // wrapped rows pick up -1/N at q != 0, so compare without spreading
        let d = dims(8, 4);
        let ch = unit(2, 1, 0.0, 0, d);
        let a = build_h_bi(&ch).unwrap();
        let b = build_h_rect(&ch).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert_eq!(u.norm() > 1e-12, v.norm() > 1e-12);
        }
    }

    #[test]
    fn matrices_match_direct_sums() {
        let d = dims(16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for wf in [Waveform::Bi, Waveform::Rect] {
            let ch = sample_channel(&mut rng, 4, 5, 2, 1, d).unwrap();
            let x = random_grid(d, &mut rng);
            let y = apply(&ch, &x, wf).unwrap();
            let xv = nalgebra::DVector::from_column_slice(x.as_slice());
            let ym = build_h(&ch, wf).unwrap() * xv;
            let ys = build_sparse(&ch, wf).mul_vec(x.as_slice()).unwrap();
            let yn: f64 = y.norm_sqr().sqrt();
            let e1: f64 = y.as_slice().iter().zip(ym.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            let e2: f64 = y.as_slice().iter().zip(&ys).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!(e1.sqrt() / yn < 1e-12 && e2.sqrt() / yn < 1e-12, "{wf:?}");
        }
    }

    #[test]
    fn unit_path_operator_norm() {
        // every row holds one entry per q, so |H| is constant across rows
        let d = dims(8, 8);
        let ch = unit(1, 1, 0.27, 2, d);
        let h = build_h_bi(&ch).unwrap();
        let rows: Vec<f64> = (0..d.mn()).map(|r| h.row(r).iter().map(|v| v.norm()).sum()).collect();
        let want: f64 = (-2..=2).map(|q| spread(q, 0.27, 8).norm()).sum();
        assert!(rows.iter().all(|r| (r - want).abs() < 1e-12));
        let sv = h.clone().singular_values();
        assert!(sv[0] <= want + 1e-9);
        let sum_f: C64 = (-2..=2).map(|q| spread(q, 0.27, 8)).sum();
        assert!(want >= sum_f.norm());
    }

    #[test]
    fn sampling_rules() {
        let d = dims(128, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = sample_channel(&mut rng, 1, 10, 4, 1, d).unwrap();
        assert_eq!(one.paths[0].l, 0);
        let a = sample_channel(&mut ChaCha8Rng::seed_from_u64(9), 6, 10, 4, 1, d).unwrap();
        let b = sample_channel(&mut ChaCha8Rng::seed_from_u64(9), 6, 10, 4, 1, d).unwrap();
        assert_eq!(a, b);
        assert!(a.paths[1..].iter().all(|p| (1..=10).contains(&p.l) && p.k.abs() <= 4));
        assert!(matches!(sample_channel(&mut rng, 5, 1, 0, 1, d), Err(Error::TooManyPaths { .. })));
    }

    #[test]
    fn mean_energy_is_one() {
        let d = dims(128, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| sample_channel(&mut rng, 6, 10, 4, 1, d).unwrap().energy()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn noise_statistics() {
        let d = dims(1000, 1000);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = DDGrid::zeros(d);
        let y = add_noise(&z, 1.0, &mut rng).unwrap();
        let var = y.norm_sqr() / d.mn() as f64;
        assert!((var - 1.0).abs() < 0.01);
        assert_eq!(add_noise(&z, f64::INFINITY, &mut rng).unwrap(), z);
        let a = add_noise(&z, 2.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = add_noise(&z, 2.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        assert!(add_noise(&z, 0.0, &mut rng).is_err());
    }

    #[test]
    fn rejects_colliding_paths() {
        let d = dims(16, 8);
        let p = ChannelPath { h: C64::new(1.0, 0.0), l: 1, k: 1, kappa: 0.0 };
        assert!(DDChannel::new(vec![p, p], 1, d).is_err());
        let bad = ChannelPath { kappa: 0.7, ..p };
        assert!(DDChannel::new(vec![bad], 1, d).is_err());
    }
}
