//! Seeded random streams. Every stochastic routine draws from a ChaCha8
//! stream keyed by `(seed, domain)` and selected by an index, so results do
//! not depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when the caller supplies none.
pub const DEFAULT_SEED: u64 = 20_160_425;

pub const DOMAIN_SUBJECTS: u64 = 0x5eed_0001;
pub const DOMAIN_RESTARTS: u64 = 0x5eed_0002;
pub const DOMAIN_REPLICATES: u64 = 0x5eed_0003;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream `index` of generator `(seed, domain)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Derived 64-bit seed, e.g. for a simulation replicate.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain)).wrapping_add(index))
}
