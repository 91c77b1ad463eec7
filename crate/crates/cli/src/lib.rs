//! Experiment runner behind the `sgdlab` binary: JSON configs in,
//! deterministic CSV/JSON out.

pub mod config;
pub mod csvfmt;
pub mod experiments;
pub mod ratefit;
