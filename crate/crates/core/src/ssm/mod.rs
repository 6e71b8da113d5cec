//! Toy multi-layer selective state-space model with input-dependent
//! zero-order-hold discretisation.

mod config;
mod model;
mod runner;

pub use config::SelectiveSsmConfig;
pub use model::{
    apply_operator, softplus, softplus_inverse, DiscretizedOperator, SelectiveSsm, CALIBRATION_RHO, SLOW_CHANNEL_RATE,
};
pub use runner::{
    probe_operator, OperatorHook, OperatorsByToken, ProbeMode, RunOptions, StepRecord, StreamState, TokenStep,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniformly random token ids.
pub fn random_tokens(vocab: usize, len: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(0..vocab)).collect()
}
