//! Polarization-entanglement distribution over metropolitan fiber: a Monte
//! Carlo link simulator and a time-tag analysis engine.
//!
//! * [`physics`] closed-form projection, fidelity and link-budget formulas
//! * [`sim`] source, fiber, compensator and detector models producing
//!   [`TagStream`]s
//! * [`tagproc`] cross-correlation, delay search and coincidence counting
//! * [`analysis`] visibility fits, budgets, channel scans and run reports
//! * [`config`] experiment documents and bundled presets
//! * [`qtag`] the binary tag-file format

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod par;
pub mod physics;
pub mod qtag;
pub mod sim;
pub mod tagproc;
pub mod tags;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use par::Execution;
pub use tags::{TagStream, TimeTag};
