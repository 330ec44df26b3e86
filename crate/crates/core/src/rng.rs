//! Stateless, counter-based randomness.
//!
//! Every random value in the lab is a pure function of a 64-bit seed and a
//! key (a lattice edge, a tree vertex label, a replica index). Nothing is
//! stored, so environments can be queried lazily, in any order, from any
//! thread, and always produce the same bits.
//!
//! The mixing function is the SplitMix64 finalizer (Stafford's "Mix13"
//! variant), applied once per absorbed key word.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain separators so lattice, tree, and replica streams never collide.
pub(crate) const LATTICE_DOMAIN: u64 = 0x4C41_5454_4943_4521;
pub(crate) const TREE_DOMAIN: u64 = 0x5452_4545_5645_5254;
const REPLICA_DOMAIN: u64 = 0x5245_504C_4943_4153;
pub(crate) const PROBE_DOMAIN: u64 = 0x5052_4F42_4549_4E54;

/// SplitMix64 finalizer. A bijection on `u64` with full avalanche.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Absorbs one word into a running hash state.
#[inline(always)]
pub fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN_GAMMA) ^ mix64(word.wrapping_add(GOLDEN_GAMMA)))
}

/// Hashes a seed together with a sequence of key words.
pub fn hash_words(seed: u64, domain: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(mix64(seed ^ domain), |state, &w| absorb(state, w))
}

/// Maps 64 random bits to a uniform value in `[0, 1)` with 53-bit resolution.
#[inline(always)]
pub fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of replica `index` under the global seed.
///
/// Coupled experiments reuse the same schedule across parameter values, so
/// replica `i` sees the same environment at every `h` or `n`.
pub fn replica_seed(global_seed: u64, index: u64) -> u64 {
    hash_words(global_seed, REPLICA_DOMAIN, &[index])
}
