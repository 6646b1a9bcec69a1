//! Experiment harness: channel ensembles, Monte Carlo studies, the
//! multi-leader protocol, configuration and persistence.

// NaN must fail argument checks, hence `!(x > 0.0)`; gain tensors read best indexed
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channels;
pub mod config;
pub mod error;
pub mod experiment;
pub mod heuristic;
pub mod instances;
pub mod montecarlo;
pub mod plot;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};

/// Independent random stream for instance `index` of a run seeded with `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
