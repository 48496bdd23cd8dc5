//! Deterministic random number generation.
//!
//! Everything stochastic in this crate (noise draws, source bits, interleaver
//! construction) is driven by generators defined here, so that results are
//! reproducible bit-for-bit across runs, thread counts, and independent
//! reimplementations. Two primitives are used, both with published reference
//! definitions:
//!
//! * **SplitMix64** — used as a seed expander and as the mixing function for
//!   derived seeds. `splitmix64_mix(z)` is the finalizer of the reference
//!   implementation: `z += 0x9E3779B97F4A7C15` is applied by the stream
//!   variant, while the mixer itself is
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//!   `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z = z ^ (z >> 31)`.
//! * **xoshiro256\*\*** — the output generator. A 256-bit state seeded by
//!   four successive SplitMix64 outputs, stepped with the reference rotation
//!   schedule. Output `t = rotl(s[1] * 5, 7) * 9`.
//!
//! Derived seeds are combined with [`derive_seed`]: each component is mixed
//! into the running value with `h = splitmix64_mix(h ^ component)`. The
//! interleaver and the per-trial seeds of the sweep harness document their
//! exact component order so other implementations can reproduce them.

use rand::RngCore;

const SPLITMIX64_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (the `mix` step of the reference generator).
#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One step of the SplitMix64 stream: advance the state by the golden-ratio
/// increment and return the mixed value.
#[inline]
pub fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX64_GAMMA);
    splitmix64_mix(*state)
}

/// Combine a base seed with a sequence of stream identifiers.
///
/// `derive_seed(master, &[a, b])` computes
/// `mix(mix(master ^ a) ^ b)` with `mix = splitmix64_mix`. Used to give every
/// (point, trial) of a sweep its own independent generator.
pub fn derive_seed(master: u64, components: &[u64]) -> u64 {
    let mut h = master;
    for &c in components {
        h = splitmix64_mix(h ^ c);
    }
    h
}

/// xoshiro256** with SplitMix64 seeding.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    /// Seed from a single `u64` by running SplitMix64 four times.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
        ];
        Self { s }
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform index in `0..bound` via the rejection-free `next() % bound`
    /// reduction. The modulo bias is below 2^-32 for every bound used here
    /// and the reduction is trivially portable.
    #[inline]
    pub fn index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next() % bound as u64) as usize
    }

    /// One uniform bit.
    #[inline]
    pub fn bit(&mut self) -> u8 {
        (self.next() >> 63) as u8
    }
}

impl RngCore for Xoshiro256StarStar {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference stream for seed 0, from the published splitmix64.c.
        let mut state = 0u64;
        assert_eq!(splitmix64_next(&mut state), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64_next(&mut state), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(splitmix64_next(&mut state), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn xoshiro_is_deterministic() {
        let mut a = Xoshiro256StarStar::seed_from_u64(42);
        let mut b = Xoshiro256StarStar::seed_from_u64(42);
        for _ in 0..100 {
            assert_eq!(a.next(), b.next());
        }
        let mut c = Xoshiro256StarStar::seed_from_u64(43);
        assert_ne!(a.next(), c.next());
    }

    #[test]
    fn derive_seed_separates_components() {
        let s1 = derive_seed(7, &[0, 0]);
        let s2 = derive_seed(7, &[0, 1]);
        let s3 = derive_seed(7, &[1, 0]);
        assert_ne!(s1, s2);
        assert_ne!(s1, s3);
        assert_ne!(s2, s3);
        // Stable over calls.
        assert_eq!(derive_seed(7, &[0, 1]), s2);
    }

    #[test]
    fn index_stays_in_bounds() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(1);
        for bound in 1..64usize {
            for _ in 0..32 {
                assert!(rng.index(bound) < bound);
            }
        }
    }
}
