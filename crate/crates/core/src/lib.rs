//! # ctflood-core
//!
//! Models and simulators for concurrent transmissions (CT) over a
//! Bluetooth-like binary FSK physical layer.
//!
//! The crate is layered bottom-up:
//! - [`waveform`]: complex-baseband BFSK synthesis, superposition, AWGN and
//!   beating envelopes.
//! - [`rx`]: two-branch non-coherent energy detector.
//! - [`analytic`]: closed-form BER/PER expressions and the modified Bessel
//!   function `I_0`.
//! - [`stats`]: Wilson score intervals.
//! - [`mc`]: Monte Carlo BER/PER sweeps and link-table calibration.
//! - [`link`]: reception-probability tables for concurrent receptions.
//! - [`airtime`]: PHY modes, on-air symbol counts, slot lengths and the
//!   iBeacon frame codec.
//! - [`node`]: the per-node flooding state machine.
//! - [`mesh`]: slot-level network simulation with energy accounting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airtime;
pub mod analytic;
pub mod error;
pub mod link;
pub mod mc;
pub mod mesh;
pub mod node;
pub mod rng;
pub mod rx;
pub mod stats;
pub mod waveform;

pub use error::{Error, Result};
