//! Deterministic sub-seed derivation.
//!
//! Every parallel unit of work (a read, an embedding trial, a bootstrap
//! iteration) derives its own RNG from `(master, unit index)`, so results
//! never depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a unit index into an independent sub-seed.
pub fn derive(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Mixes a master seed with a stage tag and an index.
pub fn derive2(master: u64, tag: u64, index: u64) -> u64 {
    derive(derive(master, tag), index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sub_rng(master: u64, index: u64) -> ChaCha8Rng {
    rng(derive(master, index))
}
