//! Counter-based seed splitting. A single user seed fans out into
//! independent streams keyed by `(seed, stream)` so parallel work never
//! shares a generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Standard normal draw by the Box–Muller transform.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1] keeps the log finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Stream tags used across the crate.
pub mod streams {
    pub const NET_INIT: u64 = 1;
    pub const WEIGHT_INIT: u64 = 2;
    pub const TRAIN_DATA: u64 = 3;
    pub const TEST_DATA: u64 = 4;
    pub const SYSTEM: u64 = 5;
    pub const CERTIFY: u64 = 6;
    pub const SEARCH: u64 = 7;
}
