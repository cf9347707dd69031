//! Counter-based random streams.
//!
//! A search owns a ChaCha stream keyed by `(seed, stream id)`. Streams with
//! different ids never overlap, so independent searches (one per BUILD step,
//! one per tree, one per query) can run on any worker in any order and still
//! reproduce bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derive a child seed, e.g. a per-tree seed from a forest seed.
pub fn derive_seed(seed: u64, id: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
