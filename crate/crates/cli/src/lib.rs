//! The `ddi` pipeline driver: configuration, artifact bookkeeping and stages.

pub mod artifacts;
pub mod config;
pub mod stages;
pub mod synth;
