//! Simulator for active and passive reconfigurable intelligent surfaces at
//! mmWave frequencies.
//!
//! - [`geometry`]: hexagonal array layout, poses, path lengths and angles.
//! - [`channel`]: element-wise received power and wideband channel model.
//! - [`beamform`]: passive phase-state and active ON/OFF selection.
//! - [`sounder`]: synthetic multitone channel sounder and field patterns.
//! - [`campaign`]: measurement-campaign orchestration and reports.
//! - [`records`], [`document`]: on-disk formats.

pub mod beamform;
pub mod campaign;
pub mod channel;
pub mod document;
pub mod error;
pub mod geometry;
pub mod records;
pub mod sounder;

pub use error::{Result, RisError};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
