//! Deterministic per-trial seed derivation.
//!
//! Every stochastic trial (one light pulse, one readout trace, one sweep grid
//! point) draws from its own generator seeded with
//! `derive_trial_seed(master, index)`. The mapping is
//!
//! ```text
//! seed(master, i) = mix64(mix64(master) + GAMMA * (i + 1))      (mod 2^64)
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer (Steele, Lea & Flood 2014):
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! and `GAMMA = 0x9E3779B97F4A7C15` is the golden-ratio increment. `mix64` is a
//! bijection on `u64` and `GAMMA` is odd, so for a fixed master the map
//! `i -> seed` is injective, and for a fixed index the map `master -> seed` is
//! injective. Only wrapping integer arithmetic is used, so results are
//! identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator used for every simulated trial.
pub type TrialRng = ChaCha8Rng;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn derive_trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    mix64(mix64(master_seed).wrapping_add(GOLDEN_GAMMA.wrapping_mul(trial_index.wrapping_add(1))))
}

/// A generator for trial `trial_index` of a run seeded with `master_seed`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    TrialRng::seed_from_u64(derive_trial_seed(master_seed, trial_index))
}
