//! Counter-based keyed hashing.
//!
//! Every random quantity in the crate is a pure function of a 64-bit key and a
//! counter, so results never depend on evaluation order or thread count.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of `(key, counter)`.
#[inline]
pub fn keyed_hash(key: u64, counter: u64) -> u64 {
    mix64(mix64(key ^ GOLDEN).wrapping_add(counter.wrapping_mul(GOLDEN)))
}

/// Per-trial seed derived from a base seed.
#[inline]
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    keyed_hash(base_seed.rotate_left(17) ^ 0x5eed_5eed_5eed_5eed, index)
}

/// Uniform double in [0, 1) from the top 53 bits of a hash.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
