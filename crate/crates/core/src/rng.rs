//! Deterministic RNG substreams.
//!
//! Every ensemble computation draws sample `i` from `substream(seed, i)`, so
//! results are independent of iteration order and safe to fan out.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic stream for `(seed, index)`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
