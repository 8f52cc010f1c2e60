//! Experiment runner for the 1-bit radio-over-fiber distributed MIMO uplink.
//!
//! Builds on `rofmimo-core` with the std-only parts: the TOML configuration,
//! parallel Monte-Carlo drivers with control variates, the experiment suite,
//! CSV output and binary dumps. The `rofmimo` binary is a thin CLI over
//! [`experiments::run`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dump;
mod error;
pub mod experiments;
pub mod mc;
pub mod output;
pub mod parallel;
pub mod scenario;

pub use error::{SimError, SimResult};
