//! One Monte-Carlo trial: channel, frame, received grid and pilot system.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, apply, sample_channel, DDChannel};
use crate::frame::{place_frame, qpsk_symbols, FrameConfig, SparseSystem};
use crate::grid::DDGrid;
use crate::kernels::GridDims;
use crate::{Result, Waveform, C64};

/// Link parameters of a trial. Noise has unit variance, so the pilot and
/// data SNRs set the transmit powers directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub dims: GridDims,
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
    pub n_hat: usize,
    pub pilots: usize,
    pub snrp_db: f64,
    /// `None` leaves the data cells empty.
    pub snrd_db: Option<f64>,
    pub waveform: Waveform,
}

impl LinkConfig {
    pub fn frame(&self) -> FrameConfig {
        let pd = self.snrd_db.map_or(0.0, db_to_lin);
        FrameConfig::standard(self.dims, self.pilots, self.l_max, self.k_max, self.n_hat)
            .with_powers(db_to_lin(self.snrp_db), pd)
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub channel: DDChannel,
    pub frame: FrameConfig,
    /// Unit-power pilot symbols.
    pub pilots: Vec<C64>,
    /// Unit-power data symbols, empty when no data was sent.
    pub data: Vec<C64>,
    pub tx: DDGrid,
    pub rx: DDGrid,
    pub system: SparseSystem,
}

/// Draw channel, pilots, data and noise, in that order, from `rng`.
pub fn draw_trial<R: Rng + ?Sized>(cfg: &LinkConfig, rng: &mut R) -> Result<Trial> {
    let frame = cfg.frame();
    frame.validate(cfg.dims)?;
    let channel = sample_channel(rng, cfg.paths, cfg.l_max, cfg.k_max, cfg.n_hat, cfg.dims)?;
    let pilots = qpsk_symbols(rng, frame.pilot_count());
    let n_data = frame.data_len(cfg.dims);
    let data = if cfg.snrd_db.is_some() { qpsk_symbols(rng, n_data) } else { Vec::new() };
    let fill = if data.is_empty() { vec![C64::new(0.0, 0.0); n_data] } else { data.clone() };
    let tx = place_frame(&frame, &pilots, &fill, cfg.dims)?;
    let clean = apply(&channel, &tx, cfg.waveform)?;
    let rx = add_noise(&clean, 1.0, rng)?;
    let system = SparseSystem::new(frame, cfg.dims, pilots.clone(), &rx, cfg.waveform)?;
    Ok(Trial { channel, frame, pilots, data, tx, rx, system })
}
