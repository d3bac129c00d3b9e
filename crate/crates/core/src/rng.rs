//! Deterministic random substreams.
//!
//! Every stochastic routine takes a 64-bit master seed. Replicate `index` of
//! a routine identified by `domain` draws from ChaCha8 seeded with
//! `splitmix64(master ^ splitmix64(domain))` on stream `index`, so results do
//! not depend on how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_SAMPLE: u64 = 0x5341_4d50;
pub const DOMAIN_BOOTSTRAP: u64 = 0x424f_4f54;
pub const DOMAIN_EXPERIMENT_BOOTSTRAP: u64 = 0x4558_4254;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived for a whole domain (used when a replicate spawns its own substreams).
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(domain)) ^ splitmix64(index.wrapping_add(1)))
}

pub fn substream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
