//! Deterministic random numbers.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`.
//! Uniforms are `rand`'s standard `f64` (the top 53 bits of `next_u64`);
//! normals use the cosine branch of Box-Muller on two such uniforms.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[0, 1)`.
pub fn uniform<R: Rng>(rng: &mut R) -> f64 {
    rng.gen()
}

/// Standard normal via Box-Muller.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // 1 - u lies in (0, 1], keeping the logarithm finite.
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_uses_top_bits() {
        let mut a = seeded(5);
        let mut b = seeded(5);
        let bits = rand::RngCore::next_u64(&mut b) >> 11;
        assert_eq!(uniform(&mut a), bits as f64 / (1u64 << 53) as f64);
    }

    #[test]
    fn uniform_range() {
        let mut rng = seeded(3);
        for _ in 0..10_000 {
            let u = uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn mix64_spreads_neighbours() {
        assert_ne!(mix64(0), mix64(1));
        assert_eq!(mix64(42), mix64(42));
    }
}
