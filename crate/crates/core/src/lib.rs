//! Clustering of partially view-aligned multi-view data.
//!
//! Each view is compressed by its own autoencoder. Aligned samples drive a
//! covariance-based view distribution alignment loss, and a sparse
//! cross-view semantic graph (built from normalized covariances with an
//! adaptive threshold) turns unaligned samples into weighted positives for a
//! contrastive objective. At evaluation time the same graph fuses views by
//! weighted neighbor aggregation before K-means.
//!
//! Module map:
//! - [`data`]: datasets, synthetic generator, alignment simulation, batching
//! - [`nn`]: MLPs, Adam, gradient checking
//! - [`stats`]: row standardization and Pearson covariance matrices
//! - [`losses`]: reconstruction, alignment and contrastive losses
//! - [`graph`]: semantic graph construction and matched-feature fusion
//! - [`cluster`]: K-means, Hungarian assignment, ACC/NMI/ARI
//! - [`trainer`]: joint optimization, evaluation, ablations, sweeps
//! - [`commands`]: in-process implementations of every CLI command

pub mod checkpoint;
pub mod cluster;
pub mod commands;
pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod losses;
pub mod nn;
pub mod stats;
pub mod trainer;

pub use error::{Error, ErrorClass, Result};

/// Dense row-major matrix used throughout.
pub type Matrix = ndarray::Array2<f64>;

pub(crate) fn rng_from_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
