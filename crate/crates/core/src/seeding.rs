//! Deterministic derivation of independent random streams from one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `stream` of the ChaCha generator seeded with `base`. Distinct
/// streams of one base are independent, which lets replicates and chains run
/// in any order (or in parallel) with identical results.
pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng
}
