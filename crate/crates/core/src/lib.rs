//! Characteristic-to-expression synthesis with a β-weighted three-pair
//! adversarial trainer, selective ensembling by inverse validation, the
//! synthetic benchmarks used to evaluate it, and a classification-based
//! validation harness.

pub mod baselines;
pub mod classifier;
pub mod cli;
pub mod ctes;
pub mod datagen;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod forest;
pub mod ndnet;
pub mod rng;

pub use error::{Error, Result};
