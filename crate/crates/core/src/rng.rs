//! Counter-based randomness.
//!
//! Every random quantity that is attached to a matrix entry is a pure function of
//! `(seed, i, j)`, so iteration order and thread count never change a draw.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of words into one 64-bit value; order-sensitive.
pub fn mix64(words: &[u64]) -> u64 {
    let mut h = avalanche(0x6a09_e667_f3bc_c909);
    for (k, &w) in words.iter().enumerate() {
        h = avalanche(h ^ avalanche(w.wrapping_add(GOLDEN.wrapping_mul(k as u64 + 1))));
    }
    h
}

/// Uniform draw in `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[0, 1)` attached to entry `(i, j)` under `seed`.
#[inline]
pub fn entry_uniform(seed: u64, i: usize, j: usize) -> f64 {
    unit_f64(mix64(&[seed, i as u64, j as u64]))
}

/// Standard normal draw attached to entry `(i, j)` under `seed` (Box-Muller).
pub fn entry_normal(seed: u64, i: usize, j: usize) -> f64 {
    let h = mix64(&[seed, i as u64, j as u64, 0x4e4f_524d]);
    // (0, 1] keeps the logarithm finite
    let u1 = 1.0 - unit_f64(h);
    let u2 = unit_f64(avalanche(h ^ GOLDEN));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded stream generator for dense fills.
pub fn stream(seed: u64, salt: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(mix64(&[seed, salt]))
}
