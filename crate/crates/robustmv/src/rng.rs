use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent stream from a base seed and a task index.
///
/// Candidate / replicate / trial loops each draw from their own stream so
/// that parallel evaluation order cannot change results.
pub fn stream(seed: u64, task: u64) -> ChaCha8Rng {
    // SplitMix64 finalizer mixes the pair into a well-spread 64-bit seed.
    let mut z = seed ^ task.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
