//! Optical identification of fiber pigtails over a coherent link.
//!
//! A short fiber pigtail scatters light from its frozen-in refractive-index
//! imperfections; interrogating it with a linear frequency sweep and
//! coherent detection turns that Rayleigh backscatter into a beat-note
//! spectrum unique to the fiber. This crate synthesizes those beat signals,
//! extracts 1-bit signatures from them, and quantifies how reliably a
//! signature identifies its fiber as a function of SNR, sweep range, power,
//! distance and measure time.
//!
//! Modules:
//! - [`physics`]: pigtail generation, beat-signal synthesis, SNR budget.
//! - [`sigproc`]: band extraction, quantization, signature files.
//! - [`identify`]: Hamming decisions, binomial tails, enrollment registry.
//! - [`trxctl`]: transceiver mode switching and measurement planning.
//! - [`experiments`]: reproducible curve generation and Monte Carlo.

pub mod error;
pub mod experiments;
pub mod identify;
pub mod physics;
pub mod seed;
pub mod sigproc;
pub mod trxctl;

pub use error::{Error, Result};
