//! Deterministic stream derivation.
//!
//! Every stochastic component draws from a stream named by what it is for
//! (a tag) plus the indices that identify the consumer (time step, agent,
//! state-action pair, ...). Streams are derived from the master seed by a
//! SplitMix64-style mixer, so results are bit-reproducible and independent
//! of evaluation order: serial and parallel execution of the same experiment
//! produce identical output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Each independent source of randomness gets its own tag so
/// streams never collide across subsystems.
pub mod tag {
    pub const ADJACENCY: u64 = 0x41444a_01;
    pub const ACTION: u64 = 0x414354_02;
    pub const NEXT_STATE: u64 = 0x4e5854_03;
    pub const INIT_STATE: u64 = 0x494e49_04;
    pub const ORACLE: u64 = 0x4f5243_05;
    pub const TEST: u64 = 0x545354_06;
}

/// SplitMix64 finalizer: a fast 64-bit mixer with full avalanche.
#[inline(always)]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

/// Derives a 64-bit sub-seed from a master seed and a list of stream labels.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut h = mix64(master ^ 0x9e37_79b9_7f4a_7c15);
    for &l in labels {
        h = mix64(h ^ l.wrapping_mul(0xff51_afd7_ed55_8ccd));
    }
    h
}

/// A named ChaCha stream for sequential draws.
pub fn derive_stream(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, labels))
}

/// Uniform in [0, 1) from a hash value.
#[inline(always)]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF draw from a weight row. `u` must be in [0, 1).
#[inline]
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_depends_on_all_labels() {
        let a = derive_seed(1, &[tag::ACTION, 7]);
        let b = derive_seed(1, &[tag::ACTION, 8]);
        let c = derive_seed(2, &[tag::ACTION, 7]);
        let d = derive_seed(1, &[tag::NEXT_STATE, 7]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn unit_f64_in_range() {
        for i in 0..1000u64 {
            let u = unit_f64(mix64(i));
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn sample_index_covers_support() {
        let w = [0.25, 0.5, 0.25];
        assert_eq!(sample_index(&w, 0.0), 0);
        assert_eq!(sample_index(&w, 0.3), 1);
        assert_eq!(sample_index(&w, 0.9), 2);
        // u just below 1 falls in the last bucket even with rounding drift
        assert_eq!(sample_index(&w, 1.0 - 1e-12), 2);
    }

    #[test]
    fn mix64_is_not_identity_like() {
        // consecutive counters must decorrelate in the high bits
        let mut prev = mix64(0);
        for i in 1..100u64 {
            let h = mix64(i);
            assert_ne!(h >> 32, prev >> 32);
            prev = h;
        }
    }
}
