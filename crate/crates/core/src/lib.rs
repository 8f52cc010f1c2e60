//! Second-order analysis of a distributed massive MIMO uplink in which every
//! access point forwards a dithered, 1-bit quantized copy of its RF signal to
//! a central unit that down-converts and combines digitally.
//!
//! The crate is `no_std` (with `alloc`). It covers:
//!
//! - [`sysconfig`]: system parameters, the discrete frequency grid, bandpass
//!   sampling and fronthaul-rate checks;
//! - [`channel`]: AP/UE geometry, path loss and Rayleigh channel draws;
//! - [`bussgang`]: autocovariances of the quantizer input and output, the
//!   Bussgang gain and the per-bin quantization-error covariance, with a
//!   streaming fast path for frequency-flat channels;
//! - [`combiners`]: Bussgang MR, ZF and LMMSE combiners and their exact EVM;
//! - [`asymptotics`]: the infinite-oversampling limits and the bounds that
//!   control convergence towards them;
//! - [`oracle`]: a waveform-level simulator used as ground truth;
//! - [`estimation`]: pilot-based channel estimation for the imperfect-CSI case.
//!
//! Energies are linear throughout; dB conversion helpers live in [`units`].

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod asymptotics;
pub mod bussgang;
pub mod channel;
pub mod combiners;
mod error;
pub mod estimation;
pub mod linalg;
pub mod math;
pub mod montecarlo;
pub mod oracle;
pub mod sysconfig;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
