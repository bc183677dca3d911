//! Link-level simulator for a short-range, ultra-reliable, low-latency radio
//! module.
//!
//! The crate is organized by subsystem:
//!
//! - [`profiles`]: requirement and service profiles, modem resource math and
//!   admission control.
//! - [`baseband`]: single-carrier transmit chain and the two receivers
//!   (time-domain LMS and frequency-domain MMSE equalization).
//! - [`channel`]: tapped-delay-line multipath shaped by a directive,
//!   circularly polarized antenna pattern, plus AWGN, CFO and phase offset.
//! - [`mux`]: deadline-driven logical channels dispatched over two modems in
//!   redundant or distributive mode.
//! - [`ranging`]: two-way time-of-flight and echo (radar) ranging with
//!   self-interference cancellation.
//! - [`harness`]: Monte Carlo sweeps, latency budgets, JSON configuration and
//!   CSV reporting.
//!
//! Every runnable capability has a matching program under `examples/`.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseband;
pub mod channel;
pub mod error;
pub mod harness;
pub mod mux;
pub mod profiles;
pub mod ranging;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
