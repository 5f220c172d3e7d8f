//! Attention-based sequential behavior interaction modeling (ASBIM).
//!
//! Predicts a child outcome measured six months after an observed
//! mother-child interaction task, from the paired per-interval behavior
//! sequences (maternal autonomy support, child defeat) plus individual
//! features. The crate is self-contained: it ships its own dense kernels
//! and reverse-mode gradient tape, full-batch Adam training, five-fold
//! cross-validation over multiply-imputed datasets, two reference
//! baselines, and a synthetic dyad-process generator for recoverability
//! experiments.
//!
//! Module map:
//! - [`numcore`]: vectors, matrices, activations, masked softmax, the
//!   gradient tape, and a finite-difference gradient checker.
//! - [`data`]: CSV ingestion, preprocessing (binarization, person means,
//!   padding), interval/outcome imputation, descriptive statistics, and
//!   the synthetic generator.
//! - [`model`]: the ASBIM forward computation and its checkpoint format.
//! - [`train`]: Adam and the deterministic full-batch training loop.
//! - [`eval`]: k-fold cross-validation, metrics, baselines, and report
//!   assembly.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numcore;
pub mod parallel;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
