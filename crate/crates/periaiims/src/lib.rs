//! Perioperative outcome modeling toolkit.
//!
//! The pipeline runs from cohort construction through explanation:
//! synthetic cohorts with planted ground truth ([`synth`]), completeness
//! filtering and design-matrix encoding ([`ingest`]), a multi-family
//! classifier zoo ([`models`]), stratified cross-validation with bootstrap
//! confidence intervals ([`eval`]), exact Shapley attribution ([`explain`]),
//! and correlation-network disruption analysis ([`netcorr`]). The [`pipeline`]
//! module orchestrates everything and writes the report bundle; `periaiims`
//! is the matching command-line entry point.
//!
//! Each capability has a runnable example under `examples/`.

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod ingest;
pub mod models;
pub mod netcorr;
pub mod pipeline;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
