//! Seeded random streams keyed by a base seed and a path of indices, so that
//! every replicate, bootstrap draw and EM restart owns an independent,
//! reproducible generator regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for the stream `(seed, keys...)`.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}

/// Stream namespaces, so that different consumers of one seed never collide.
pub(crate) mod tag {
    pub const GENERATE: u64 = 1;
    pub const BOOT_DENSITY: u64 = 2;
    pub const BOOT_MODE: u64 = 3;
    pub const EM_RESTART: u64 = 4;
    pub const REPLICATE: u64 = 5;
}
