//! Monte-Carlo campaigns over seeded trials.
//!
//! Trial `t` of a run with seed `s` draws from ChaCha8 seeded with `s` on
//! stream `t`, so a trial's randomness depends only on `(s, t)`. Cells of
//! a sweep reuse the same streams, which pairs the channel draws across
//! SNR points and keeps aggregates independent of scheduling order.

use otfs_core::baseline::{sigma_p, threshold_baseline};
use otfs_core::channel::{add_noise, build_sparse, sample_channel, DDChannel};
use otfs_core::crlb::{crlb_bounds, fisher_matrix, normalized_bounds};
use otfs_core::detect::{qpsk_bit_errors, DataDetector};
use otfs_core::estimator::{
    detect_support, estimate, estimate_integer_doppler, reconstruct_channel, EstimateResult,
};
use otfs_core::frame::{data_cells, place_frame, qpsk_symbols, FrameConfig, SparseSystem};
use otfs_core::grid::DDGrid;
use otfs_core::kernels::GridDims;
use otfs_core::metrics::{median, nmse_matrix, nmse_real, to_db};
use otfs_core::modem::{isfft, papr, to_time_rect};
use otfs_core::scenario::{db_to_lin, draw_trial, LinkConfig, Trial};
use otfs_core::sparse::SparseMatrix;
use otfs_core::{Waveform, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::output::MetricRow;
use crate::record::{ChannelRecord, EstimateRecord};
use crate::SimError;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One point of an NMSE sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub paths: usize,
    pub pilots: usize,
    pub snrp_db: f64,
}

/// Per-trial errors as linear ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub nmse_h: f64,
    pub nmse_kappa: f64,
    pub nmse_hmat: f64,
    pub baseline_hmat: Option<f64>,
    pub integer_hmat: Option<f64>,
    /// Normalised gain and fractional Doppler bounds.
    pub crlb: Option<(f64, f64)>,
    pub iterations: usize,
    pub converged: bool,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, SimError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))
}

impl SimConfig {
    pub fn link(&self, cell: Cell) -> Result<LinkConfig, SimError> {
        Ok(LinkConfig {
            dims: self.dims()?,
            paths: cell.paths,
            l_max: self.l_max,
            k_max: self.k_max,
            n_hat: self.n_hat,
            pilots: cell.pilots,
            snrp_db: cell.snrp_db,
            snrd_db: None,
            waveform: self.waveform,
        })
    }

    /// Sweep cells in output order: path count, then pilots, then SNR.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &paths in &self.paths {
            for &pilots in &self.pilots {
                for &snrp_db in &self.snrp_db {
                    out.push(Cell { paths, pilots, snrp_db });
                }
            }
        }
        out
    }
}

/// Channel matrix of the paths an estimate keeps after thresholding.
pub fn estimated_channel(res: &EstimateResult, sys: &SparseSystem, rho: f64) -> Result<SparseMatrix, SimError> {
    let paths = detect_support(res, sys, rho)?;
    Ok(reconstruct_channel(&paths, sys.dims, res.n_hat, sys.waveform)?)
}

fn gains_at_truth(res: &EstimateResult, ch: &DDChannel, cfg: &FrameConfig) -> (Vec<C64>, Vec<f64>) {
    ch.paths
        .iter()
        .map(|p| {
            let j = cfg.block_index(p.l, p.k);
            (res.h_hat[j], res.kappa_hat[j])
        })
        .unzip()
}

fn nmse_complex(est: &[C64], truth: &[C64]) -> f64 {
    let den: f64 = truth.iter().map(|v| v.norm_sqr()).sum();
    est.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / den
}

pub fn run_trial(cfg: &SimConfig, cell: Cell, trial: u64) -> Result<TrialOutcome, SimError> {
    let link = cfg.link(cell)?;
    let mut rng = trial_rng(cfg.seed, trial);
    let tr = draw_trial(&link, &mut rng)?;
    evaluate_trial(cfg, &link, &tr)
}

fn evaluate_trial(cfg: &SimConfig, link: &LinkConfig, tr: &Trial) -> Result<TrialOutcome, SimError> {
    let hp = &cfg.estimator;
    let truth = build_sparse(&tr.channel, link.waveform);
    let res = estimate(&tr.system, hp)?;
    let est = estimated_channel(&res, &tr.system, hp.support_rho)?;
    let (h, k) = gains_at_truth(&res, &tr.channel, &tr.frame);
    let h_true: Vec<C64> = tr.channel.paths.iter().map(|p| p.h).collect();
    let k_true: Vec<f64> = tr.channel.paths.iter().map(|p| p.kappa).collect();
    let baseline_hmat = if cfg.baseline && link.pilots == 1 {
        let b = threshold_baseline(&tr.system, sigma_p(link.snrp_db))?;
        Some(nmse_matrix(&b.to_matrix(link.dims), &truth)?)
    } else {
        None
    };
    let integer_hmat = if cfg.integer {
        let r = estimate_integer_doppler(&tr.system, hp)?;
        let sys0 = tr.system.integer_only()?;
        Some(nmse_matrix(&estimated_channel(&r, &sys0, hp.support_rho)?, &truth)?)
    } else {
        None
    };
    let crlb = if cfg.crlb { Some(trial_crlb(tr, link.waveform)?) } else { None };
    Ok(TrialOutcome {
        nmse_h: nmse_complex(&h, &h_true),
        nmse_kappa: nmse_real(&k, &k_true),
        nmse_hmat: nmse_matrix(&est, &truth)?,
        baseline_hmat,
        integer_hmat,
        crlb,
        iterations: res.iterations,
        converged: res.converged,
    })
}

fn trial_crlb(tr: &Trial, wf: Waveform) -> Result<(f64, f64), SimError> {
    let fim = fisher_matrix(&tr.channel, &tr.frame, &tr.pilots, 1.0, wf)?;
    Ok(normalized_bounds(&crlb_bounds(&fim)?, &tr.channel)?)
}

/// All trials of the given cells, in cell then trial order.
pub fn run_cells(cfg: &SimConfig, cells: &[Cell]) -> Result<Vec<Vec<TrialOutcome>>, SimError> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| (0..cfg.trials as u64).map(move |t| (c, t))).collect();
    let flat: Vec<TrialOutcome> = pool(cfg.jobs)?.install(|| {
        jobs.par_iter().map(|&(c, t)| run_trial(cfg, cells[c], t)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(flat.chunks(cfg.trials).map(|c| c.to_vec()).collect())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn mean_db(xs: impl Iterator<Item = f64>) -> Option<f64> {
    mean(xs).map(to_db)
}

pub fn nmse_row(cfg: &SimConfig, cell: Cell, outcomes: &[TrialOutcome]) -> MetricRow {
    let per_trial_db: Vec<f64> = outcomes.iter().map(|o| to_db(o.nmse_hmat)).collect();
    MetricRow {
        paths: Some(cell.paths),
        pilots: Some(cell.pilots),
        snrp_db: Some(cell.snrp_db),
        trials: outcomes.len(),
        nmse_h_db: mean_db(outcomes.iter().map(|o| o.nmse_h)),
        nmse_kappa_db: mean_db(outcomes.iter().map(|o| o.nmse_kappa)),
        nmse_hmat_db: mean_db(outcomes.iter().map(|o| o.nmse_hmat)),
        median_nmse_hmat_db: Some(median(&per_trial_db)),
        baseline_nmse_hmat_db: mean_db(outcomes.iter().filter_map(|o| o.baseline_hmat)),
        integer_nmse_hmat_db: mean_db(outcomes.iter().filter_map(|o| o.integer_hmat)),
        crlb_h_db: mean_db(outcomes.iter().filter_map(|o| o.crlb.map(|c| c.0))),
        crlb_kappa_db: mean_db(outcomes.iter().filter_map(|o| o.crlb.map(|c| c.1))),
        ..MetricRow::new("nmse", cfg)
    }
}

/// NMSE of gains, fractional Doppler and the effective channel matrix
/// against pilot SNR, with baseline, ablation and bound overlays.
pub fn run_nmse_sweep(cfg: &SimConfig) -> Result<Vec<MetricRow>, SimError> {
    let cells = cfg.cells();
    let all = run_cells(cfg, &cells)?;
    Ok(cells.iter().zip(&all).map(|(c, o)| nmse_row(cfg, *c, o)).collect())
}

/// Normalised bounds alone, averaged over the sampled channels.
pub fn run_crlb_sweep(cfg: &SimConfig) -> Result<Vec<MetricRow>, SimError> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| (0..cfg.trials as u64).map(move |t| (c, t))).collect();
    let flat: Vec<(f64, f64)> = pool(cfg.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| {
                let link = cfg.link(cells[c])?;
                let tr = draw_trial(&link, &mut trial_rng(cfg.seed, t))?;
                trial_crlb(&tr, link.waveform)
            })
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    Ok(cells
        .iter()
        .zip(flat.chunks(cfg.trials))
        .map(|(cell, b)| MetricRow {
            paths: Some(cell.paths),
            pilots: Some(cell.pilots),
            snrp_db: Some(cell.snrp_db),
            trials: b.len(),
            crlb_h_db: mean_db(b.iter().map(|x| x.0)),
            crlb_kappa_db: mean_db(b.iter().map(|x| x.1)),
            ..MetricRow::new("crlb", cfg)
        })
        .collect())
}

/// PAPR in dB of one random frame sent with rectangular pulses.
pub fn frame_papr(cfg: &SimConfig, pilots: usize, snrp_db: f64, frame: u64) -> Result<f64, SimError> {
    let dims = cfg.dims()?;
    let fc = FrameConfig::standard(dims, pilots, cfg.l_max, cfg.k_max, cfg.n_hat)
        .with_powers(db_to_lin(snrp_db), db_to_lin(cfg.snrd_db));
    fc.validate(dims)?;
    let mut rng = trial_rng(cfg.seed, frame);
    let p = qpsk_symbols(&mut rng, pilots);
    let d = qpsk_symbols(&mut rng, fc.data_len(dims));
    let tx = place_frame(&fc, &p, &d, dims)?;
    Ok(papr(&to_time_rect(&isfft(&tx)))?)
}

/// Mean PAPR over random frames for every (pilot SNR, pilot count) pair.
pub fn run_papr_table(cfg: &SimConfig) -> Result<Vec<MetricRow>, SimError> {
    cfg.validate()?;
    let frames = cfg.papr.frames;
    let mut cells = Vec::new();
    for &snrp in &cfg.papr.snrp_db {
        for &np in &cfg.papr.pilots {
            cells.push((snrp, np));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..frames as u64).map(move |f| (c, f))).collect();
    let flat: Vec<f64> = pool(cfg.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(c, f)| frame_papr(cfg, cells[c].1, cells[c].0, f))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(cells
        .iter()
        .zip(flat.chunks(frames))
        .map(|(&(snrp, np), v)| MetricRow {
            pilots: Some(np),
            snrp_db: Some(snrp),
            snrd_db: Some(cfg.snrd_db),
            trials: v.len(),
            papr_db: mean(v.iter().copied()),
            ..MetricRow::new("papr", cfg)
        })
        .collect())
}

/// Bit errors of one frame for each SNR point, per receiver: perfect,
/// proposed, threshold (single pilot only) and integer Doppler.
#[derive(Debug, Clone, PartialEq)]
pub struct BerFrame {
    pub symbols: usize,
    pub errors: [Vec<Option<usize>>; 4],
}

pub fn ber_frame(cfg: &SimConfig, frame: u64) -> Result<BerFrame, SimError> {
    let b = &cfg.ber;
    let wf = cfg.waveform;
    let dims = GridDims::new(b.m, b.n)?;
    let fc = FrameConfig::standard(dims, b.pilots, b.l_max, b.k_max, b.n_hat).with_powers(db_to_lin(b.snrp_db), 0.0);
    fc.validate(dims)?;
    let mut rng = trial_rng(cfg.seed, frame);
    let ch = sample_channel(&mut rng, b.paths, b.l_max, b.k_max, b.n_hat, dims)?;
    let pilots = qpsk_symbols(&mut rng, fc.pilot_count());
    let cells = data_cells(&fc, dims);
    let data = qpsk_symbols(&mut rng, cells.len());
    let noise = add_noise(&DDGrid::zeros(dims), 1.0, &mut rng)?.into_vec();

    let h = build_sparse(&ch, wf);
    let xp = place_frame(&fc, &pilots, &vec![C64::new(0.0, 0.0); cells.len()], dims)?.into_vec();
    let mut xd = vec![C64::new(0.0, 0.0); dims.mn()];
    for (i, &c) in cells.iter().enumerate() {
        xd[c] = data[i];
    }
    let yp = h.mul_vec(&xp)?;
    let yd = h.mul_vec(&xd)?;
    let received = |snrd: f64| -> Vec<C64> {
        let s = db_to_lin(snrd).sqrt();
        yp.iter().zip(&yd).zip(&noise).map(|((p, d), w)| p + d * s + w).collect()
    };

    // guard cells keep data out of the pilot window, so any SNR point
    // yields the same observation
    let rx = DDGrid::from_vec(dims, received(b.snrd_db[0]))?;
    let sys = SparseSystem::new(fc, dims, pilots, &rx, wf)?;
    let hp = &cfg.estimator;
    let proposed = estimated_channel(&estimate(&sys, hp)?, &sys, hp.support_rho)?;
    let sys0 = sys.integer_only()?;
    let integer = estimated_channel(&estimate_integer_doppler(&sys, hp)?, &sys0, hp.support_rho)?;
    let threshold = if b.pilots == 1 {
        Some(threshold_baseline(&sys, sigma_p(b.snrp_db))?.to_matrix(dims))
    } else {
        None
    };

    let receivers = [Some(h), Some(proposed), threshold, Some(integer)];
    let mut errors: [Vec<Option<usize>>; 4] = Default::default();
    for (slot, hh) in receivers.iter().enumerate() {
        let Some(hh) = hh else {
            errors[slot] = vec![None; b.snrd_db.len()];
            continue;
        };
        let det = DataDetector::new(hh, &cells);
        let pilot_echo = hh.mul_vec(&xp)?;
        for &snrd in &b.snrd_db {
            let y: Vec<C64> = received(snrd).iter().zip(&pilot_echo).map(|(a, p)| a - p).collect();
            let pd = db_to_lin(snrd);
            let dec = det.detect(&y, pd, pd.sqrt())?;
            errors[slot].push(Some(qpsk_bit_errors(&dec, &data)));
        }
    }
    Ok(BerFrame { symbols: cells.len(), errors })
}

/// Frames needed to reach the configured symbol count.
pub fn ber_frames(cfg: &SimConfig) -> Result<usize, SimError> {
    let b = &cfg.ber;
    let dims = GridDims::new(b.m, b.n)?;
    let fc = FrameConfig::standard(dims, b.pilots, b.l_max, b.k_max, b.n_hat);
    fc.validate(dims)?;
    Ok(b.min_symbols.div_ceil(fc.data_len(dims)))
}

/// Bit error rate of LMMSE detection against data SNR for the perfect,
/// proposed, threshold and integer-Doppler channel matrices.
pub fn run_ber(cfg: &SimConfig) -> Result<Vec<MetricRow>, SimError> {
    cfg.validate()?;
    let frames = ber_frames(cfg)?;
    let all: Vec<BerFrame> = pool(cfg.jobs)?.install(|| {
        (0..frames as u64).into_par_iter().map(|f| ber_frame(cfg, f)).collect::<Result<Vec<_>, _>>()
    })?;
    let bits: usize = all.iter().map(|f| 2 * f.symbols).sum();
    let b = &cfg.ber;
    let rate = |slot: usize, i: usize| -> Option<f64> {
        let mut total = 0usize;
        for f in &all {
            total += f.errors[slot][i]?;
        }
        Some(total as f64 / bits as f64)
    };
    Ok(b.snrd_db
        .iter()
        .enumerate()
        .map(|(i, &snrd)| MetricRow {
            m: b.m,
            n: b.n,
            paths: Some(b.paths),
            pilots: Some(b.pilots),
            snrp_db: Some(b.snrp_db),
            snrd_db: Some(snrd),
            trials: frames,
            ber_perfect: rate(0, i),
            ber_proposed: rate(1, i),
            ber_threshold: rate(2, i),
            ber_integer: rate(3, i),
            ..MetricRow::new("ber", cfg)
        })
        .collect())
}

/// Everything one seeded trial produces, for dumping.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub channel: ChannelRecord,
    pub estimate: EstimateRecord,
    pub row: MetricRow,
}

/// First cell of the sweep, trial 0.
pub fn estimate_once(cfg: &SimConfig) -> Result<SingleRun, SimError> {
    cfg.validate()?;
    let cell = cfg.cells()[0];
    let link = cfg.link(cell)?;
    let tr = draw_trial(&link, &mut trial_rng(cfg.seed, 0))?;
    let res = estimate(&tr.system, &cfg.estimator)?;
    let support = detect_support(&res, &tr.system, cfg.estimator.support_rho)?;
    let outcome = evaluate_trial(cfg, &link, &tr)?;
    let mut row = nmse_row(cfg, cell, std::slice::from_ref(&outcome));
    row.sweep = "estimate".into();
    Ok(SingleRun {
        channel: ChannelRecord::from_channel(&tr.channel),
        estimate: EstimateRecord::new(&res, &tr.frame, &support),
        row,
    })
}

/// Outcome of one self-consistency suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst < self.tol
    }
}

pub use crate::checks::model_check;
