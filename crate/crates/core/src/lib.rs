//! Simulation, decoding and analysis stack for ERP-based (P300) speller BCIs.
//!
//! The pipeline runs from a display paradigm and its flash code, through a
//! synthetic 16-channel EEG subject, acquisition and analysis filtering,
//! epoching and decimation, to a Bayesian LDA classifier with an adaptive
//! stopping rule, and ends in per-session and cohort statistics.

pub mod analysis;
pub mod blda;
pub mod decoder;
pub mod dsp;
mod error;
pub mod io;
pub mod paradigm;
pub mod session;
pub mod synth;

pub use error::{Error, Result};
