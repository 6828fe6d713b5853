//! Data-quality diagnostics for hourly district-heating meter readings.

pub mod diagnostics;
pub mod stats;
pub mod store;
pub mod synth;
