//! Benchmark methods: PLS regression, GRNN, and the adversarial variants
//! expressed as trainer settings.

mod grnn;
mod pls;
mod variant;

pub use grnn::{grnn_predict, median_pairwise_distance, GrnnModel};
pub use pls::{pls_fit, pls_predict, PlsModel};
pub use variant::{variant_config, Method, VariantSettings};
