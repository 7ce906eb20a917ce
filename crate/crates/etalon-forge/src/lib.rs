//! Multistage Fabry-Perot etalon modeling and digital length synthesis.
//!
//! The library models an n-cavity etalon as a closed-form rational transfer
//! function in z^-1 (one base quantum of one-way optical path per unit
//! delay), measures spectral figures of merit (FSR, peak stopband rejection,
//! MSE, percentage fit), builds FSR-enhancement target profiles, estimates
//! rational models from intensity-only targets, and scans integer cavity
//! lengths to realize a desired profile with fixed reflectivities.

pub mod config;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod spectral;
pub mod synth;
pub mod sysid;
pub mod target;

pub use error::{Error, Result};
