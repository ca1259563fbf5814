//! Delay-Doppler OTFS channel estimation with fractional Doppler shifts.
//!
//! The crate models the DD-domain input/output relation of OTFS for the
//! ideal bi-orthogonal and the rectangular pulse, builds the pilot
//! observation dictionary, and recovers path gains and fractional Doppler
//! shifts with a structured sparse message-passing estimator. A threshold
//! estimator and Cramer-Rao bounds are provided for comparison.
//!
//! Everything here only needs `alloc`; file formats, parallel sweeps and the
//! command line live in the `otfs-sim` crate.
//!
//! ```
//! use otfs_core::kernels::spread_f;
//! let f = spread_f(0, 0.0, 32).unwrap();
//! assert!((f.re - 1.0).abs() < 1e-12 && f.im.abs() < 1e-12);
//! ```
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod channel;
pub mod crlb;
pub mod detect;
pub mod error;
pub mod estimator;
pub mod frame;
pub mod grid;
pub mod kernels;
pub mod metrics;
pub mod modem;
pub mod scenario;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Pulse shape assumed by the channel model and the dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    /// Ideal bi-orthogonal transmit/receive pulses.
    Bi,
    /// Rectangular pulses.
    Rect,
}
