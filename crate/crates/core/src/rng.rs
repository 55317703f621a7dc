//! Seed derivation for reproducible parallel streams. Every consumer mixes a
//! base seed with integer tags through splitmix64 and seeds an independent
//! ChaCha12 stream, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for (seed, tags). Distinct tag tuples give streams with
/// no shared state.
pub fn derive_stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut s = splitmix64(seed);
    for &t in tags {
        s = splitmix64(s ^ t.wrapping_mul(0xD1B5_4A32_D192_ED03));
    }
    ChaCha12Rng::seed_from_u64(s)
}
