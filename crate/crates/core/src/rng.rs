//! Counter-based derivation of independent random streams.
//!
//! Every stochastic stage draws from a stream keyed by the master seed and a
//! short tag path (run, time step, potential target, purpose). Streams do not
//! depend on the order in which work is scheduled, so results are identical
//! for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic stage.
pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different stages of the same step apart.
pub mod purpose {
    pub const PARTITION: u64 = 0x7061_7274;
    pub const BIRTH: u64 = 0x6269_7274;
    pub const PREDICT: u64 = 0x7072_6564;
    pub const RESAMPLE: u64 = 0x7265_7361;
    pub const TRUTH: u64 = 0x7472_7574;
    pub const FRAME: u64 = 0x6672_616d;
    pub const TRACKER: u64 = 0x7472_6163;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a tag path into a derived 64-bit seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Returns the generator for the stream identified by `seed` and `tags`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}
