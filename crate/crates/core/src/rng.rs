//! Seed handling.
//!
//! One run seed fans out into independent ChaCha streams, one per purpose,
//! so that changing e.g. the number of rejection proposals never perturbs
//! the round-two draws from the base distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for the split RNG streams of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Round-1 instance draws.
    Round1Draws = 1,
    /// Tie-break values, consumed in sample-ingestion order.
    TieBreaks = 2,
    /// Unlabeled witness pool for the augmented-region membership test.
    WitnessPool = 3,
    /// Rejection-sampling proposals.
    RejectionProposals = 4,
    /// Round-2 draws from the base distribution.
    Round2Draws = 5,
    /// Bernoulli label flips, consumed in labeling order.
    LabelFlips = 6,
    /// Unlabeled draws for the positivity check.
    PositivityProbe = 7,
    /// Fresh draws for Monte-Carlo estimators.
    MonteCarlo = 8,
    /// Everything else (shattering search, bootstrap, ...).
    Auxiliary = 9,
}

/// A deterministic generator for the given purpose, derived from `seed`.
///
/// Streams with the same seed but different tags are independent ChaCha
/// streams of the same key.
pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// SplitMix64 finalizer; used to derive child seeds from a master seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `index` of a master seed.
///
/// The counter scheme is `splitmix64(master XOR splitmix64(index))`, so
/// child seeds are stable under reordering of the index space.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}
