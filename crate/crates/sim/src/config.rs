//! Campaign configuration, loaded from JSON or `key = value` text.

use std::path::Path;

use otfs_core::estimator::Hyperparams;
use otfs_core::kernels::GridDims;
use otfs_core::Waveform;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SimError;

/// Top-level campaign settings. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Delay bins.
    pub m: usize,
    /// Doppler bins.
    pub n: usize,
    pub carrier_hz: f64,
    pub delta_f_hz: f64,
    /// Path counts to sweep.
    pub paths: Vec<usize>,
    pub l_max: usize,
    pub k_max: usize,
    pub n_hat: usize,
    pub snrp_db: Vec<f64>,
    pub snrd_db: f64,
    /// Pilot counts to sweep.
    pub pilots: Vec<usize>,
    pub waveform: Waveform,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub jobs: usize,
    pub estimator: Hyperparams,
    /// Add the threshold baseline to single-pilot cells.
    pub baseline: bool,
    /// Add the integer-Doppler ablation to every cell.
    pub integer: bool,
    pub crlb: bool,
    pub papr: PaprConfig,
    pub ber: BerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaprConfig {
    pub frames: usize,
    pub snrp_db: Vec<f64>,
    pub pilots: Vec<usize>,
}

/// Desk-scale link for bit error rate runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerConfig {
    pub m: usize,
    pub n: usize,
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
    pub n_hat: usize,
    pub pilots: usize,
    pub snrp_db: f64,
    pub snrd_db: Vec<f64>,
    /// Lower bound on data symbols per SNR point.
    pub min_symbols: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            m: 128,
            n: 32,
            carrier_hz: 3e9,
            delta_f_hz: 2e3,
            paths: vec![6],
            l_max: 10,
            k_max: 4,
            n_hat: 1,
            snrp_db: vec![30.0, 35.0, 40.0, 45.0, 50.0],
            snrd_db: 14.0,
            pilots: vec![1],
            waveform: Waveform::Bi,
            trials: 200,
            seed: 1,
            jobs: 0,
            estimator: Hyperparams::default(),
            baseline: true,
            integer: false,
            crlb: true,
            papr: PaprConfig::default(),
            ber: BerConfig::default(),
        }
    }
}

impl Default for PaprConfig {
    fn default() -> Self {
        Self { frames: 500, snrp_db: vec![40.0, 50.0], pilots: vec![1, 10] }
    }
}

impl Default for BerConfig {
    fn default() -> Self {
        Self {
            m: 32,
            n: 16,
            paths: 6,
            l_max: 5,
            k_max: 2,
            n_hat: 1,
            pilots: 1,
            snrp_db: 40.0,
            snrd_db: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0],
            min_symbols: 100_000,
        }
    }
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

fn check_snrs(name: &str, v: &[f64]) -> Result<(), SimError> {
    if v.is_empty() {
        return Err(bad(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("{name} holds a non-finite value")));
    }
    Ok(())
}

impl SimConfig {
    /// Parse a file. Text starting with `{` is JSON, anything else is read
    /// as TOML-style `key = value` lines.
    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| bad(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| bad(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dims(&self) -> Result<GridDims, SimError> {
        GridDims::new(self.m, self.n).map_err(|e| bad(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.dims()?;
        if self.trials == 0 {
            return Err(bad("trials must be at least 1"));
        }
        if self.paths.is_empty() || self.paths.contains(&0) {
            return Err(bad("paths must list positive counts"));
        }
        if self.pilots.is_empty() || self.pilots.contains(&0) {
            return Err(bad("pilots must list positive counts"));
        }
        check_snrs("snrp_db", &self.snrp_db)?;
        check_snrs("papr.snrp_db", &self.papr.snrp_db)?;
        check_snrs("ber.snrd_db", &self.ber.snrd_db)?;
        if !self.snrd_db.is_finite() || !self.ber.snrp_db.is_finite() {
            return Err(bad("SNR values must be finite"));
        }
        if !(self.carrier_hz > 0.0 && self.delta_f_hz > 0.0) {
            return Err(bad("carrier and subcarrier spacing must be positive"));
        }
        if self.papr.frames == 0 || self.papr.pilots.is_empty() || self.papr.pilots.contains(&0) {
            return Err(bad("papr needs frames and positive pilot counts"));
        }
        let b = &self.ber;
        GridDims::new(b.m, b.n).map_err(|e| bad(e.to_string()))?;
        if b.paths == 0 || b.pilots == 0 || b.min_symbols == 0 {
            return Err(bad("ber paths, pilots and min_symbols must be positive"));
        }
        self.estimator.validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    /// Short content hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Doppler resolution in Hz.
    pub fn doppler_resolution_hz(&self) -> f64 {
        self.delta_f_hz / self.n as f64
    }

    /// Delay resolution in seconds.
    pub fn delay_resolution_s(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f_hz)
    }
}
