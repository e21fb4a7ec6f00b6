//! Seed derivation for reproducible, parallel Monte Carlo.
//!
//! Every random object in the workspace is keyed by a 64-bit seed. Parallel
//! trials derive independent substream seeds with [`mix`], a splittable
//! splitmix64-based combiner, so results are identical no matter how work is
//! scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; full-period 64-bit mixer.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a substream seed from a parent seed and a stream index.
///
/// `mix(s, a) != mix(s, b)` for `a != b` with overwhelming probability, and
/// the derived streams are decorrelated from the parent stream.
#[inline]
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream).rotate_left(17))
}

/// Substream tags, so distinct uses of the same trial seed never collide.
pub mod stream {
    pub const MASK: u64 = 0x4d41_534b; // mask Bernoulli draws
    pub const VALUE: u64 = 0x5641_4c55; // entry value draws
    pub const PROBE: u64 = 0x50_524f42; // solver probe vectors
    pub const CELL: u64 = 0x43_454c4c; // harness grid cells
    pub const TRIAL: u64 = 0x5452_4941; // Monte Carlo trials
}

/// The deterministic generator used everywhere in this crate.
pub type Rng = ChaCha8Rng;

/// Construct the standard generator for a derived seed.
#[inline]
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn mix_separates_streams() {
        let a = mix(42, stream::MASK);
        let b = mix(42, stream::VALUE);
        let c = mix(43, stream::MASK);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn rng_is_reproducible() {
        let mut r1 = rng_from_seed(mix(7, 1));
        let mut r2 = rng_from_seed(mix(7, 1));
        for _ in 0..32 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs of splitmix64 seeded with 0 and 1 (widely published
        // reference stream values).
        assert_eq!(splitmix64(0), 0xE220A8397B1DCDAF);
        assert_eq!(splitmix64(1), 0x910A2DEC89025CC1);
    }
}
