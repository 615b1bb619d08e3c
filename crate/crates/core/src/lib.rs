//! Relative mean particle size estimation for fragmented rock piles from
//! proprioceptive excavation telemetry.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`telemetry`] ingests channels, filters, differentiates and resamples them.
//! * [`cwt`] computes analytic-wavelet scalograms of a channel window.
//! * [`features`] finds the excavation window and reduces a scalogram to the
//!   wavelet features `beta` (max over scales) and `zeta` (area over frequency).
//! * [`relative`] calibrates against a reference pile, estimates size ratios and
//!   classifies piles as smaller or larger than the reference.
//! * [`granulometry`] models sieve data with the Rosin-Rammler law.
//! * [`simulate`] generates synthetic excavation trials with known particle
//!   populations.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cwt;
pub mod error;
pub mod features;
pub mod fixtures;
pub mod granulometry;
pub mod pipeline;
pub mod relative;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod telemetry;

pub use error::{Error, Result};
