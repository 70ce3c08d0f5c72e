//! Seed splitting. Every random stream in a run is derived from the run seed
//! and a stream index, so results do not depend on evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    rng_for(seed, stream).next_u64()
}
