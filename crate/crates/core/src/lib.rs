//! Situation-aware driving-style adaptation on top of frozen scene embeddings.
//!
//! The pipeline clusters standardized embeddings into driving situations
//! ([`cluster`]), keeps a per-situation table of lateral-offset statistics
//! ([`dsds`]) or trains small neural heads ([`mlp`]) per driver, and scores
//! the result with RMSE and an entropy-based cluster specificity ([`metrics`]).
//! [`harness`] wires these into the adaptation, sweep and streaming protocols;
//! [`synth`] produces datasets with known latent structure for testing.
//!
//! Data-parallel inner loops (k-means assignment, per-seed jobs) run on rayon
//! when the `parallel` feature is enabled and an [`Exec::Parallel`] mode is
//! requested. Both modes produce bitwise-identical results.

pub mod baselines;
pub mod cluster;
pub mod data;
pub mod dsds;
mod error;
mod exec;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod preprocess;
mod sum;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use exec::Exec;
pub use matrix::Matrix;
pub use sum::KahanSum;
