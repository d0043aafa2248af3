//! Label-noise detection from training dynamics.
//!
//! A companion set of deliberately mislabeled copies is pooled with the
//! training data. A classifier is trained on the pool while per-epoch
//! signals are recorded, and a small convolutional encoder clusters the
//! resulting trajectories into noisy and clean groups. The companion set
//! supplies both the centroid initialization and a label-free validation
//! metric for epoch selection.

pub mod baselines;
pub mod config;
pub mod corruption;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod trainer;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used by every seeded stage.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
