//! Anomalous transaction detection with parenclitic networks.
//!
//! Raw transaction features are compared against pairwise linear relations
//! fitted on licit history. Each transaction becomes a small graph whose edges
//! mark feature pairs that deviate from those relations; structural metrics
//! of that graph are appended to the raw features and fed to a three-layer
//! perceptron.

pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod mlp;
pub mod network;
pub mod pipeline;
pub mod synth;
pub mod topo;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for a given seed and stream. Distinct streams of
/// one seed are independent, so each pipeline stage draws from its own.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
