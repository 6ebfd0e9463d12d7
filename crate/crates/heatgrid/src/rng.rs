//! Deterministic derivation of independent RNG streams from one master
//! seed, so every stochastic component (initialization, scenarios,
//! exploration, sampling, smoothing) has its own reproducible stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a well-mixed 64-bit hash.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A sub-seed for stream `stream` of run `master_seed`.
pub fn seed_stream(master_seed: u64, stream: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(stream))
}

/// A ChaCha stream for (`master_seed`, `stream`).
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_stream(master_seed, stream))
}
