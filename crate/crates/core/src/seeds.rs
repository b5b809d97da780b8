//! Deterministic seed derivation.
//!
//! Every randomized stage derives its generator from `(seed, stream, index)`
//! so that work units can run in any order (or in parallel) and still produce
//! bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Well-known stream tags. Keeping them in one place guarantees two stages
/// never collide on the same derived seed.
pub mod stream {
    pub const GENERATE_CASE: u64 = 1;
    pub const GENERATE_COVARIATES: u64 = 2;
    pub const GENERATE_OUTCOME: u64 = 3;
    pub const GENERATE_HEATMAP: u64 = 4;
    pub const GENERATE_PROTOTYPES: u64 = 5;
    pub const GENERATE_SPLITS: u64 = 6;
    pub const TRAIN_INIT: u64 = 16;
    pub const TRAIN_BATCH: u64 = 17;
    pub const TRAIN_EVAL: u64 = 18;
    pub const SEARCH_CONFIG: u64 = 19;
    pub const SEARCH_TRAIN: u64 = 20;
    pub const BOOTSTRAP: u64 = 32;
    pub const KMEANS: u64 = 33;
    pub const CLUSTER_SCORES: u64 = 34;
}

/// SplitMix64 step; the standard 64-bit finalizer.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed, a stream tag, and an index.
pub fn child_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

/// ChaCha generator for a derived seed.
pub fn child_rng(seed: u64, stream: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(child_seed(seed, stream, index))
}

/// ChaCha generator directly from a root seed.
pub fn root_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
