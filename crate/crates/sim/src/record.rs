//! JSON dumps of channels and estimates.

use otfs_core::channel::{ChannelPath, DDChannel};
use otfs_core::estimator::EstimateResult;
use otfs_core::frame::FrameConfig;
use otfs_core::kernels::GridDims;
use otfs_core::C64;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub re: f64,
    pub im: f64,
    pub l: usize,
    pub k: i64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_hat: usize,
    pub paths: Vec<PathRecord>,
}

impl ChannelRecord {
    pub fn from_channel(ch: &DDChannel) -> Self {
        Self {
            m: ch.dims.m,
            n: ch.dims.n,
            n_hat: ch.n_hat,
            paths: ch
                .paths
                .iter()
                .map(|p| PathRecord { re: p.h.re, im: p.h.im, l: p.l, k: p.k, kappa: p.kappa })
                .collect(),
        }
    }

    pub fn to_channel(&self) -> Result<DDChannel, SimError> {
        let paths = self
            .paths
            .iter()
            .map(|p| ChannelPath { h: C64::new(p.re, p.im), l: p.l, k: p.k, kappa: p.kappa })
            .collect();
        Ok(DDChannel::new(paths, self.n_hat, GridDims::new(self.m, self.n)?)?)
    }
}

/// Estimate of one delay/Doppler block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub l: usize,
    pub k: i64,
    pub re: f64,
    pub im: f64,
    pub var: f64,
    pub kappa: f64,
    pub support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub gamma_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_hat: usize,
    pub blocks: Vec<BlockRecord>,
}

impl EstimateRecord {
    pub fn new(res: &EstimateResult, cfg: &FrameConfig, support: &[ChannelPath]) -> Self {
        let blocks = (0..res.h_hat.len())
            .map(|j| {
                let (l, k) = cfg.block_td(j);
                BlockRecord {
                    l,
                    k,
                    re: res.h_hat[j].re,
                    im: res.h_hat[j].im,
                    var: res.v_h[j],
                    kappa: res.kappa_hat[j],
                    support: support.iter().any(|p| p.l == l && p.k == k),
                }
            })
            .collect();
        Self { gamma_hat: res.gamma_hat, iterations: res.iterations, converged: res.converged, n_hat: res.n_hat, blocks }
    }
}
