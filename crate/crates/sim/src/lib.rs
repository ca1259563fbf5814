//! Monte-Carlo harness around `otfs-core`: seeded NMSE, PAPR, BER and
//! bound sweeps, CSV and JSON output, and the `otfs` command line.
//!
//! ```
//! use otfs_sim::config::SimConfig;
//! use otfs_sim::harness::run_papr_table;
//!
//! let cfg = SimConfig::from_text("m = 32\nn = 16\nl_max = 3\nk_max = 1\n[papr]\nframes = 4\npilots = [1]").unwrap();
//! let rows = run_papr_table(&cfg).unwrap();
//! assert_eq!(rows.len(), 2);
//! assert!(rows[0].papr_db.unwrap() > 0.0);
//! ```

pub mod checks;
pub mod config;
pub mod harness;
pub mod output;
pub mod record;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] otfs_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// Process exit status: 3 for configuration problems, 4 for numerical
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 3,
            SimError::Core(_) => 4,
            _ => 1,
        }
    }
}
