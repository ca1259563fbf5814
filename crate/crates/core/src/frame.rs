//! Pilot/guard/data layout, the pilot observation window and the sparse
//! recovery dictionary.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::DDChannel;
use crate::grid::DDGrid;
use crate::kernels::{phi_raw, wrap, GridDims};
use crate::{Error, Result, Waveform, C64};

/// Placement and power of the pilot block and its guard.
///
/// The pilot block spans `m_p` delay bins by `n_p` Doppler bins starting at
/// `(l0, k0)`. Pilot and data symbols are given with unit average power and
/// scaled by the square roots of `pilot_power` and `data_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub m_p: usize,
    pub n_p: usize,
    pub l_max: usize,
    pub k_max: usize,
    pub n_hat: usize,
    pub pilot_power: f64,
    pub data_power: f64,
    pub l0: usize,
    pub k0: usize,
}

impl FrameConfig {
    /// `pilots` pilots laid along delay, origin at `(l_max, N/2)`.
    pub fn standard(dims: GridDims, pilots: usize, l_max: usize, k_max: usize, n_hat: usize) -> Self {
        Self {
            m_p: pilots,
            n_p: 1,
            l_max,
            k_max,
            n_hat,
            pilot_power: 1.0,
            data_power: 1.0,
            l0: l_max,
            k0: dims.n / 2,
        }
    }

    pub fn with_powers(mut self, pilot_power: f64, data_power: f64) -> Self {
        self.pilot_power = pilot_power;
        self.data_power = data_power;
        self
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        let bad = |m: &str| Err(Error::Layout(m.to_string()));
        if self.m_p == 0 || self.n_p == 0 {
            return bad("empty pilot block");
        }
        if self.l0 < self.l_max {
            return bad("pilot delay origin must be at least l_max");
        }
        if self.l0 + self.m_p + self.l_max > dims.m {
            return bad("delay guard runs past the grid");
        }
        if self.n_p + 4 * (self.k_max + self.n_hat) > dims.n {
            return bad("Doppler guard wider than the grid");
        }
        if self.k0 >= dims.n {
            return bad("pilot Doppler origin outside the grid");
        }
        if !(self.pilot_power > 0.0) || !(self.data_power >= 0.0) {
            return bad("powers must be positive");
        }
        Ok(())
    }

    pub fn pilot_count(&self) -> usize {
        self.m_p * self.n_p
    }

    /// Observation length `(l_max + M_p)(N_p + 2 k_max + 2 N^)`.
    pub fn z(&self) -> usize {
        (self.l_max + self.m_p) * (self.n_p + 2 * self.k_max + 2 * self.n_hat)
    }

    /// Number of candidate (t, d) blocks.
    pub fn j(&self) -> usize {
        (self.l_max + 1) * (2 * self.k_max + 1)
    }

    /// Block length `2 N^ + 1`.
    pub fn b(&self) -> usize {
        2 * self.n_hat + 1
    }

    pub fn block_index(&self, t: usize, d: i64) -> usize {
        (self.l_max + 1) * (self.k_max as i64 + d) as usize + t
    }

    pub fn block_td(&self, j: usize) -> (usize, i64) {
        (j % (self.l_max + 1), (j / (self.l_max + 1)) as i64 - self.k_max as i64)
    }

    /// Fraction of the grid taken by pilots and guards.
    pub fn overhead(&self, dims: GridDims) -> f64 {
        self.reserved_len() as f64 / dims.mn() as f64
    }

    fn reserved_len(&self) -> usize {
        (self.m_p + 2 * self.l_max) * (self.n_p + 4 * (self.k_max + self.n_hat))
    }

    /// Number of data symbols a frame carries.
    pub fn data_len(&self, dims: GridDims) -> usize {
        dims.mn() - self.reserved_len()
    }

    /// True for pilot and guard cells.
    pub fn is_reserved(&self, k: usize, l: usize, dims: GridDims) -> bool {
        let g = 2 * (self.k_max + self.n_hat);
        let dl = l as i64 - (self.l0 - self.l_max) as i64;
        let dk = wrap(k as i64 - self.k0 as i64 + g as i64, dims.n);
        dl >= 0 && (dl as usize) < self.m_p + 2 * self.l_max && dk < self.n_p + 2 * g
    }

    /// Offset of (k, l) inside the pilot block, if it lies there.
    pub fn pilot_slot(&self, k: usize, l: usize, dims: GridDims) -> Option<usize> {
        let dl = l.checked_sub(self.l0)?;
        let dk = wrap(k as i64 - self.k0 as i64, dims.n);
        (dl < self.m_p && dk < self.n_p).then_some(dk * self.m_p + dl)
    }

    /// Observation cells `(k, l)`, delay-major: delay outer, Doppler inner.
    pub fn window(&self, dims: GridDims) -> Vec<(usize, usize)> {
        let w = (self.k_max + self.n_hat) as i64;
        let mut rows = Vec::with_capacity(self.z());
        for l in self.l0..self.l0 + self.l_max + self.m_p {
            for k in self.k0 as i64 - w..self.k0 as i64 + self.n_p as i64 + w {
                rows.push((wrap(k, dims.n), l));
            }
        }
        rows
    }
}

/// Unit-power QPSK symbols.
pub fn qpsk_symbols<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            C64::new(re, im)
        })
        .collect()
}

fn check_pilots(cfg: &FrameConfig, pilots: &[C64]) -> Result<()> {
    if pilots.len() != cfg.pilot_count() {
        return Err(Error::DimensionMismatch { expected: cfg.pilot_count(), got: pilots.len() });
    }
    if pilots.iter().all(|p| p.norm_sqr() == 0.0) {
        return Err(Error::Layout("all pilots are zero".to_string()));
    }
    Ok(())
}

/// Lay out one frame: scaled pilots, zero guard, scaled data elsewhere in
/// vectorised order.
pub fn place_frame(cfg: &FrameConfig, pilots: &[C64], data: &[C64], dims: GridDims) -> Result<DDGrid> {
    cfg.validate(dims)?;
    if pilots.len() != cfg.pilot_count() {
        return Err(Error::DimensionMismatch { expected: cfg.pilot_count(), got: pilots.len() });
    }
    if data.len() != cfg.data_len(dims) {
        return Err(Error::DimensionMismatch { expected: cfg.data_len(dims), got: data.len() });
    }
    let (sp, sd) = (libm::sqrt(cfg.pilot_power), libm::sqrt(cfg.data_power));
    let mut grid = DDGrid::zeros(dims);
    let mut next = data.iter();
    for k in 0..dims.n {
        for l in 0..dims.m {
            if let Some(s) = cfg.pilot_slot(k, l, dims) {
                grid.set(k, l, pilots[s] * sp);
            } else if !cfg.is_reserved(k, l, dims) {
                grid.set(k, l, next.next().copied().unwrap_or_default() * sd);
            }
        }
    }
    Ok(grid)
}

/// Data symbols back out of a grid, in the order [`place_frame`] consumed them.
pub fn data_cells(cfg: &FrameConfig, dims: GridDims) -> Vec<usize> {
    let mut out = Vec::with_capacity(cfg.data_len(dims));
    for k in 0..dims.n {
        for l in 0..dims.m {
            if !cfg.is_reserved(k, l, dims) {
                out.push(dims.index(k, l));
            }
        }
    }
    out
}

pub fn extract_observation(y: &DDGrid, cfg: &FrameConfig) -> Vec<C64> {
    cfg.window(y.dims()).into_iter().map(|(k, l)| y.get(k, l)).collect()
}

/// Bi-orthogonal dictionary: column `j*B + b` holds the pilot seen through
/// a unit tap at delay t, Doppler d, spreading offset `q = b - N^`.
pub fn build_dictionary_bi(cfg: &FrameConfig, pilots: &[C64], dims: GridDims) -> Result<DMatrix<C64>> {
    build_dictionary_q(cfg, pilots, dims, cfg.n_hat)
}

pub(crate) fn build_dictionary_q(
    cfg: &FrameConfig,
    pilots: &[C64],
    dims: GridDims,
    q_half: usize,
) -> Result<DMatrix<C64>> {
    cfg.validate(dims)?;
    check_pilots(cfg, pilots)?;
    let sp = libm::sqrt(cfg.pilot_power);
    let rows = cfg.window(dims);
    let b = 2 * q_half + 1;
    let mut x = DMatrix::zeros(rows.len(), cfg.j() * b);
    for (z, &(k, l)) in rows.iter().enumerate() {
        for j in 0..cfg.j() {
            let (t, d) = cfg.block_td(j);
            for bi in 0..b {
                let q = bi as i64 - q_half as i64;
                let kp = wrap(k as i64 - d + q, dims.n);
                let lp = wrap(l as i64 - t as i64, dims.m);
                if let Some(s) = cfg.pilot_slot(kp, lp, dims) {
                    x[(z, j * b + bi)] = pilots[s] * sp;
                }
            }
        }
    }
    Ok(x)
}

/// Rectangular-pulse dictionary: the bi-orthogonal one with row z rotated
/// by `exp(j 2 pi l_z (d + kappa_j) / MN)`.
pub fn build_dictionary_rect(
    cfg: &FrameConfig,
    pilots: &[C64],
    dims: GridDims,
    kappa_est: &[f64],
) -> Result<DMatrix<C64>> {
    let mut x = build_dictionary_bi(cfg, pilots, dims)?;
    rotate_rect(&mut x, cfg, dims, cfg.b(), kappa_est)?;
    Ok(x)
}

pub(crate) fn rotate_rect(
    x: &mut DMatrix<C64>,
    cfg: &FrameConfig,
    dims: GridDims,
    b: usize,
    kappa: &[f64],
) -> Result<()> {
    if kappa.len() != cfg.j() {
        return Err(Error::DimensionMismatch { expected: cfg.j(), got: kappa.len() });
    }
    let rows = cfg.window(dims);
    let mn = dims.mn() as f64;
    for n in 0..x.ncols() {
        let j = n / b;
        let (_, d) = cfg.block_td(j);
        for (z, &(_, l)) in rows.iter().enumerate() {
            let v = x[(z, n)];
            if v.norm_sqr() != 0.0 {
                x[(z, n)] = v * C64::from_polar(1.0, 2.0 * PI * l as f64 * (d as f64 + kappa[j]) / mn);
            }
        }
    }
    Ok(())
}

/// Ground-truth block-sparse coefficient vector of a channel.
pub fn build_true_c(ch: &DDChannel, cfg: &FrameConfig) -> Result<Vec<C64>> {
    let b = cfg.b();
    let mut c = vec![C64::new(0.0, 0.0); cfg.j() * b];
    for p in &ch.paths {
        if p.l > cfg.l_max || p.k.unsigned_abs() as usize > cfg.k_max {
            return Err(Error::Layout("path outside the tap limits".to_string()));
        }
        let j = cfg.block_index(p.l, p.k);
        for bi in 0..b {
            let q = bi as i64 - cfg.n_hat as i64;
            c[j * b + bi] = p.h * phi_raw(q, p.kappa, p.l, p.k, ch.dims);
        }
    }
    Ok(c)
}

/// Pilot observation together with its dictionary.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub y: Vec<C64>,
    pub x: DMatrix<C64>,
    pub cfg: FrameConfig,
    pub dims: GridDims,
    /// Unit-power pilot symbols, as passed to [`place_frame`].
    pub pilots: Vec<C64>,
    pub waveform: Waveform,
    /// Spreading half-width the dictionary columns cover.
    pub q_half: usize,
}

impl SparseSystem {
    /// Extract the window from a received grid and build the matching
    /// dictionary (rectangular columns start at zero fractional Doppler).
    pub fn new(cfg: FrameConfig, dims: GridDims, pilots: Vec<C64>, received: &DDGrid, waveform: Waveform) -> Result<Self> {
        received.check_dims(dims)?;
        let mut x = build_dictionary_bi(&cfg, &pilots, dims)?;
        if waveform == Waveform::Rect {
            rotate_rect(&mut x, &cfg, dims, cfg.b(), &vec![0.0; cfg.j()])?;
        }
        let y = extract_observation(received, &cfg);
        Ok(Self { y, x, cfg, dims, pilots, waveform, q_half: cfg.n_hat })
    }

    pub fn b(&self) -> usize {
        2 * self.q_half + 1
    }

    /// Bi-orthogonal dictionary for this system's spreading width.
    pub(crate) fn base_dictionary(&self) -> Result<DMatrix<C64>> {
        build_dictionary_q(&self.cfg, &self.pilots, self.dims, self.q_half)
    }

    /// Same observation, dictionary restricted to the `q = 0` columns.
    pub fn integer_only(&self) -> Result<Self> {
        let mut out = self.clone();
        out.q_half = 0;
        out.x = out.base_dictionary()?;
        if self.waveform == Waveform::Rect {
            rotate_rect(&mut out.x, &self.cfg, self.dims, 1, &vec![0.0; self.cfg.j()])?;
        }
        Ok(out)
    }

    /// Pilot amplitude of a single-pilot frame.
    pub fn single_pilot(&self) -> Result<C64> {
        if self.cfg.pilot_count() != 1 {
            return Err(Error::MultiPilot(self.cfg.pilot_count()));
        }
        Ok(self.pilots[0] * libm::sqrt(self.cfg.pilot_power))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply, sample_channel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_dims() -> GridDims {
        GridDims::new(128, 32).unwrap()
    }

    #[test]
    fn overhead_matches_closed_form() {
        let cfg = FrameConfig::standard(full_dims(), 1, 10, 4, 1);
        assert!((cfg.overhead(full_dims()) - 441.0 / 4096.0).abs() < 1e-15);
        let reserved = (0..32).flat_map(|k| (0..128).map(move |l| (k, l)))
            .filter(|&(k, l)| cfg.is_reserved(k, l, full_dims())).count();
        assert_eq!(reserved, 441);
    }

    #[test]
    fn single_pilot_frame() {
        let d = full_dims();
        let cfg = FrameConfig::standard(d, 1, 10, 4, 1);
        let data = vec![C64::new(0.0, 0.0); cfg.data_len(d)];
        let g = place_frame(&cfg, &[C64::new(1.0, 0.0)], &data, d).unwrap();
        let nz: Vec<_> = g.as_slice().iter().enumerate().filter(|(_, v)| v.norm() > 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, d.index(16, 10));
    }

    #[test]
    fn guard_is_zero_with_data() {
        let d = full_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = FrameConfig::standard(d, 10, 10, 4, 1).with_powers(100.0, 25.0);
        let pilots = qpsk_symbols(&mut rng, 10);
        let data = qpsk_symbols(&mut rng, cfg.data_len(d));
        let g = place_frame(&cfg, &pilots, &data, d).unwrap();
        for k in 0..d.n {
            for l in 0..d.m {
                let v = g.get(k, l);
                match (cfg.pilot_slot(k, l, d), cfg.is_reserved(k, l, d)) {
                    (Some(_), _) => assert!((v.norm() - 10.0).abs() < 1e-12),
                    (None, true) => assert_eq!(v, C64::new(0.0, 0.0)),
                    (None, false) => assert!((v.norm() - 5.0).abs() < 1e-12),
                }
            }
        }
        assert!(place_frame(&cfg, &pilots, &data[1..], d).is_err());
    }

    #[test]
    fn window_shape_and_identity_channel() {
        let d = full_dims();
        let cfg = FrameConfig::standard(d, 3, 10, 4, 1);
        assert_eq!(cfg.window(d).len(), cfg.z());
        assert_eq!(cfg.z(), 13 * 11);
        let pilots = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
        let g = place_frame(&cfg, &pilots, &vec![C64::new(0.0, 0.0); cfg.data_len(d)], d).unwrap();
        let y = extract_observation(&g, &cfg);
        // pilot block sits in the first delay rows, Doppler offset k_max + N^
        let w = cfg.n_p + 2 * (cfg.k_max + cfg.n_hat);
        for (z, v) in y.iter().enumerate() {
            let (ll, kk) = (z / w, z % w);
            let want = if ll < 3 && kk == 5 { pilots[ll] } else { C64::new(0.0, 0.0) };
            assert_eq!(*v, want);
        }
    }

    #[test]
    fn index_maps_round_trip() {
        let cfg = FrameConfig::standard(full_dims(), 1, 10, 4, 2);
        for j in 0..cfg.j() {
            let (t, d) = cfg.block_td(j);
            assert!(t <= 10 && d.abs() <= 4);
            assert_eq!(cfg.block_index(t, d), j);
        }
        for n in 0..cfg.j() * cfg.b() {
            assert_eq!((n / cfg.b()) * cfg.b() + n % cfg.b(), n);
        }
    }

    #[test]
    fn unit_pilot_dictionary_is_orthogonal() {
        let d = full_dims();
        let cfg = FrameConfig::standard(d, 1, 10, 4, 1);
        let x = build_dictionary_bi(&cfg, &[C64::new(1.0, 0.0)], d).unwrap();
        let g = x.adjoint() * &x;
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                if r != c {
                    // distinct columns that shift onto the same cell coincide
                    let same = (x.column(r) - x.column(c)).norm() == 0.0;
                    assert!(same || g[(r, c)].norm() == 0.0);
                }
            }
        }
        assert!(build_dictionary_bi(&cfg, &[C64::new(0.0, 0.0)], d).is_err());
    }

    #[test]
    fn rect_dictionary_is_a_rotation() {
        let d = full_dims();
        let cfg = FrameConfig::standard(d, 2, 10, 4, 1);
        let pilots = vec![C64::new(1.0, 0.0), C64::new(0.0, -1.0)];
        let xb = build_dictionary_bi(&cfg, &pilots, d).unwrap();
        let kap: Vec<f64> = (0..cfg.j()).map(|j| 0.01 * j as f64 - 0.4).collect();
        let xr = build_dictionary_rect(&cfg, &pilots, d, &kap).unwrap();
        for (a, b) in xb.iter().zip(xr.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let x0 = build_dictionary_rect(&cfg, &pilots, d, &vec![0.0; cfg.j()]).unwrap();
        let j = cfg.block_index(3, 0);
        for bi in 0..3 {
            assert_eq!(x0.column(j * 3 + bi), xb.column(j * 3 + bi));
        }
    }

    #[test]
    fn true_c_blocks() {
        let d = full_dims();
        let cfg = FrameConfig::standard(d, 1, 10, 4, 1);
        let empty = DDChannel::new(vec![], 1, d).unwrap();
        assert!(build_true_c(&empty, &cfg).unwrap().iter().all(|v| v.norm() == 0.0));
        let one = DDChannel::new(vec![crate::channel::ChannelPath { h: C64::new(1.0, 0.0), l: 0, k: 0, kappa: 0.0 }], 1, d).unwrap();
        let c = build_true_c(&one, &cfg).unwrap();
        let j = cfg.block_index(0, 0);
        assert!((c[j * 3 + 1] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(c[j * 3].norm() < 1e-14 && c[j * 3 + 2].norm() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = sample_channel(&mut rng, 6, 10, 4, 1, d).unwrap();
        let c = build_true_c(&ch, &cfg).unwrap();
        let blocks = (0..cfg.j()).filter(|j| c[j * 3..j * 3 + 3].iter().any(|v| v.norm() > 0.0)).count();
        assert_eq!(blocks, 6);
    }

    #[test]
    fn window_ignores_data() {
        let d = full_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = FrameConfig::standard(d, 4, 10, 4, 1).with_powers(1e4, 25.0);
        let pilots = qpsk_symbols(&mut rng, 4);
        let ch = sample_channel(&mut rng, 6, 10, 4, 1, d).unwrap();
        for wf in [Waveform::Bi, Waveform::Rect] {
            let a = place_frame(&cfg, &pilots, &qpsk_symbols(&mut rng, cfg.data_len(d)), d).unwrap();
            let b = place_frame(&cfg, &pilots, &qpsk_symbols(&mut rng, cfg.data_len(d)), d).unwrap();
            let ya = extract_observation(&apply(&ch, &a, wf).unwrap(), &cfg);
            let yb = extract_observation(&apply(&ch, &b, wf).unwrap(), &cfg);
            let diff: f64 = ya.iter().zip(&yb).map(|(u, v)| (u - v).norm_sqr()).sum();
            assert!(diff.sqrt() < 1e-10, "{wf:?} {diff}");
        }
    }
}
