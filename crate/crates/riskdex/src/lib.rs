//! riskdex builds a composite risk index for administrative regions from
//! an indicator table.
//!
//! The pipeline: min-max normalization of every column, factorability
//! diagnostics (Bartlett sphericity, KMO), per-block single-factor
//! measurement models for indicator weights, canonical correlation
//! against observed hazard counts for factor weights, exact 1D k-means
//! rank binning, and a multivariate-regression/MANOVA significance
//! report. Everything is deterministic: two runs on the same inputs
//! produce byte-identical artifacts.
//!
//! Each stage is usable on its own — see the `examples/` directory for
//! one runnable example per capability — or orchestrated end to end from
//! a declarative config via [`pipeline::run_pipeline`] and the `riskdex`
//! binary.

pub mod canonical;
pub mod composite;
pub mod config;
pub mod error;
pub mod factor;
pub mod geo;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod regression;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
