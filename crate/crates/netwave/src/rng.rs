//! Seeded, portable random number streams.
//!
//! All randomness in the crate is drawn from PCG-64 generators derived from a
//! single base seed and a stream label. The derivation is fixed:
//! `stream_seed = splitmix64(base_seed ^ fnv1a64(label))`, so identical
//! `(seed, label)` pairs yield identical sequences on every platform.
//!
//! Stream labels in use:
//! - `"segments"`: fiber placement; each placement draws midpoint x, midpoint
//!   y, then rotation angle, in that order.
//! - `"gamma"`: per-edge scalar stiffness coefficients, drawn in edge order.
//! - `"eigen"`: starting vectors for eigenvalue iterations.

use rand_core::Rng as _;
use rand_pcg::Pcg64;

fn fnv1a64(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A generator for the given base seed and stream label.
pub fn stream(seed: u64, label: &str) -> Pcg64 {
    use rand_core::SeedableRng;
    Pcg64::seed_from_u64(splitmix64(seed ^ fnv1a64(label)))
}

/// Uniform draw in `[0, 1)` using the top 53 bits of the next output.
pub fn uniform(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform_in(rng: &mut Pcg64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Vector with entries uniform in `[-1, 1)`.
pub fn uniform_vector(rng: &mut Pcg64, len: usize) -> Vec<f64> {
    (0..len).map(|_| uniform_in(rng, -1.0, 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<f64> = {
            let mut rng = stream(7, "segments");
            (0..8).map(|_| uniform(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = stream(7, "segments");
            (0..8).map(|_| uniform(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn streams_are_independent_per_label() {
        let mut a = stream(7, "segments");
        let mut b = stream(7, "gamma");
        let xs: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = stream(3, "test");
        for _ in 0..1000 {
            let x = uniform(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }
}
