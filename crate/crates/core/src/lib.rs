//! Fairness-aware classifier training by dynamic group reweighting.
//!
//! Every training example belongs to one of `K` fairness groups. Each group
//! has a fairness level `F_k` that can be written as a linear combination of
//! group error rates, `F = C · err`. Lagrange multipliers are ascended on
//! `F` after every batch and turned into per-group loss weights
//! `w_k = P(T_k) + Σ_k' C[k'][k] λ_k'`, which may be negative.
//!
//! Modules, bottom-up:
//!
//! - [`data`]: datasets, CSV ingestion, splitting, standardization and the
//!   Gaussian synthetic generator.
//! - [`fairness`]: group partitions, the constant matrices, error-rate
//!   estimates and fairness levels (by decomposition and by definition).
//! - [`model`]: linear and ReLU-MLP softmax classifiers with group-weighted
//!   cross-entropy and analytic gradients.
//! - [`trainer`]: multiplier updates, group weights, the training loop and
//!   checkpoint selection.
//! - [`report`]: evaluation into accuracy / fairness summaries and file
//!   emitters.
//! - [`cli`]: the `fairgrad` command-line front end, including sweeps.

pub mod cli;
pub mod data;
mod error;
pub mod fairness;
pub mod model;
mod numfmt;
pub mod report;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
