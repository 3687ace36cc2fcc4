//! Millimeter-wave beamforming simulator.
//!
//! Models a fixed access point (AP) with a uniform linear array serving a
//! moving single-antenna station (STA) over a line-of-sight 60 GHz link.
//! The crate provides:
//!
//! - [`array`]: ULA steering vectors and far-field array patterns.
//! - [`channel`]: rank-1 LOS channel construction, link budget and SNR.
//! - [`codebook`]: pencil (steering/SVD) codebooks and an evolutionary
//!   designer for flat-top wide beams.
//! - [`tracking`]: blind particle-filter beam tracking from SNR-only
//!   observations, plus the drop-triggered TRN sweep baseline.
//! - [`sim`]: scenario engine tying trajectory, channel, and controller
//!   together into reproducible runs with CSV/JSON metrics.
//! - [`config`] / [`manifest`]: external file formats used by the
//!   `beamtrack` command-line tool.
//!
//! All internal angles are radians; external interfaces (config files,
//! CSV traces) use degrees.

pub mod array;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod error;
pub mod manifest;
pub mod rng;
pub mod sim;
pub mod tracking;

pub use error::{Error, Result};
