//! Self-consistency suites behind `otfs model-check`.

use nalgebra::DVector;
use otfs_core::channel::{apply, build_h, build_sparse, sample_channel};
use otfs_core::frame::{
    build_dictionary_bi, build_dictionary_rect, build_true_c, extract_observation, place_frame, qpsk_symbols,
    FrameConfig,
};
use otfs_core::grid::DDGrid;
use otfs_core::kernels::{phi, phi_prime, spread_f, spread_series, GridDims};
use otfs_core::{Waveform, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::harness::{trial_rng, CheckResult};
use crate::SimError;

fn rel(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn gaussian_grid(rng: &mut ChaCha8Rng, dims: GridDims) -> DDGrid {
    let data = (0..dims.mn()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    DDGrid::from_vec(dims, data).expect("length matches")
}

/// Matrix-built versus direct-sum channel outputs, dense and sparse.
fn model_equivalence(cfg: &SimConfig, cases: usize) -> Result<[CheckResult; 2], SimError> {
    let mut worst = [0.0f64; 2];
    for i in 0..cases {
        let mut rng = trial_rng(cfg.seed, i as u64);
        let m = [8, 16, 24, 32][rng.random_range(0..4)];
        let n = [8, 12, 16][rng.random_range(0..3)];
        let dims = GridDims::new(m, n)?;
        let l_max = rng.random_range(1..=4);
        let k_max = rng.random_range(1..=2);
        let n_hat = rng.random_range(0..=2);
        let p = rng.random_range(1..=6.min(1 + l_max * (2 * k_max + 1)));
        let ch = sample_channel(&mut rng, p, l_max, k_max, n_hat, dims)?;
        let x = gaussian_grid(&mut rng, dims);
        for (w, wf) in [Waveform::Bi, Waveform::Rect].into_iter().enumerate() {
            let direct = apply(&ch, &x, wf)?;
            let dense = build_h(&ch, wf)? * DVector::from_column_slice(x.as_slice());
            let sparse = build_sparse(&ch, wf).mul_vec(x.as_slice())?;
            worst[w] = worst[w].max(rel(dense.as_slice(), direct.as_slice())).max(rel(&sparse, direct.as_slice()));
        }
    }
    Ok([
        CheckResult { name: "model equivalence (bi)", cases, worst: worst[0], tol: 1e-10 },
        CheckResult { name: "model equivalence (rect)", cases, worst: worst[1], tol: 1e-10 },
    ])
}

/// Noiseless pilot window versus dictionary times true coefficients.
fn dictionary_consistency(cfg: &SimConfig, cases: usize) -> Result<[CheckResult; 2], SimError> {
    let mut worst = [0.0f64; 2];
    for i in 0..cases {
        let mut rng = trial_rng(cfg.seed ^ 0x5eed, i as u64);
        let dims = GridDims::new([16, 24, 32][rng.random_range(0..3)], 16)?;
        let l_max = rng.random_range(1..=3);
        let k_max = rng.random_range(1..=2);
        let n_hat = rng.random_range(0..=1);
        let np = rng.random_range(1..=3);
        let fc = FrameConfig::standard(dims, np, l_max, k_max, n_hat).with_powers(100.0, 4.0);
        fc.validate(dims)?;
        let p = rng.random_range(1..=6.min(1 + l_max * (2 * k_max + 1)));
        let ch = sample_channel(&mut rng, p, l_max, k_max, n_hat, dims)?;
        let pilots = qpsk_symbols(&mut rng, np);
        let data = qpsk_symbols(&mut rng, fc.data_len(dims));
        let tx = place_frame(&fc, &pilots, &data, dims)?;
        let c = DVector::from_vec(build_true_c(&ch, &fc)?);
        let mut kappa = vec![0.0; fc.j()];
        for path in &ch.paths {
            kappa[fc.block_index(path.l, path.k)] = path.kappa;
        }
        for (w, wf) in [Waveform::Bi, Waveform::Rect].into_iter().enumerate() {
            let x = match wf {
                Waveform::Bi => build_dictionary_bi(&fc, &pilots, dims)?,
                Waveform::Rect => build_dictionary_rect(&fc, &pilots, dims, &kappa)?,
            };
            let window = extract_observation(&apply(&ch, &tx, wf)?, &fc);
            worst[w] = worst[w].max(rel((x * &c).as_slice(), &window));
        }
    }
    Ok([
        CheckResult { name: "dictionary consistency (bi)", cases, worst: worst[0], tol: 1e-10 },
        CheckResult { name: "dictionary consistency (rect)", cases, worst: worst[1], tol: 1e-10 },
    ])
}

fn kernel_identities(cfg: &SimConfig) -> Result<[CheckResult; 3], SimError> {
    let n = 32;
    let (mut series, mut partition) = (0.0f64, 0.0f64);
    let mut count = 0;
    for qi in 0..100 {
        let q = qi as i64 - 50;
        for ki in 0..100 {
            let kappa = -0.5 + ki as f64 / 99.0;
            let f = spread_f(q, kappa, n)?;
            series = series.max((f - spread_series(q as f64 + kappa, n)).norm());
            count += 1;
        }
    }
    for ki in 0..100 {
        let kappa = -0.5 + ki as f64 / 99.0;
        let mut s = C64::new(0.0, 0.0);
        for q in 0..n as i64 {
            s += spread_f(q, kappa, n)?;
        }
        partition = partition.max((s - 1.0).norm());
    }
    let dims = GridDims::new(cfg.m, cfg.n)?;
    let mut rng = trial_rng(cfg.seed ^ 0xd1ff, 0);
    let mut deriv = 0.0f64;
    let step = 1e-6;
    for _ in 0..100 {
        let q = rng.random_range(-2..=2);
        let kappa = rng.random_range(-0.45..0.45);
        let t = rng.random_range(0..=cfg.l_max);
        let d = rng.random_range(-(cfg.k_max as i64)..=cfg.k_max as i64);
        let fd = (phi(q, kappa + step, t, d, dims)? - phi(q, kappa - step, t, d, dims)?) / (2.0 * step);
        let an = phi_prime(q, kappa, t, d, dims)?;
        deriv = deriv.max((fd - an).norm() / an.norm().max(1e-3));
    }
    Ok([
        CheckResult { name: "spreading series identity", cases: count, worst: series, tol: 1e-10 },
        CheckResult { name: "spreading unit partition", cases: 100, worst: partition, tol: 1e-10 },
        CheckResult { name: "phase kernel derivative", cases: 100, worst: deriv, tol: 1e-4 },
    ])
}

/// Run every suite on `cases` random instances each.
pub fn model_check(cfg: &SimConfig, cases: usize) -> Result<Vec<CheckResult>, SimError> {
    cfg.validate()?;
    let mut out = Vec::new();
    out.extend(model_equivalence(cfg, cases)?);
    out.extend(dictionary_consistency(cfg, cases)?);
    out.extend(kernel_identities(cfg)?);
    Ok(out)
}
