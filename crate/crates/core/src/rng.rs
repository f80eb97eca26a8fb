//! Seed derivation.
//!
//! Every stochastic draw in an experiment comes from a ChaCha stream keyed by
//! `(master seed, trial index, purpose)`. Trials never share a generator, so
//! results do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for derived streams. Values are part of the on-disk
/// reproducibility contract; do not renumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Encode = 1,
    InputPerturbation = 2,
    WeightPerturbation = 3,
    InputBank = 4,
    Checkpoint = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under `master`. Recorded alongside each trial; all
/// of the trial's streams derive from it.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let a = splitmix64(master);
    splitmix64(a ^ trial.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    splitmix64(trial_seed ^ (stream as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Mixes a master seed, trial index and stream tag into one 64-bit seed.
pub fn derive_seed(master: u64, trial: u64, stream: Stream) -> u64 {
    stream_seed(trial_seed(master, trial), stream)
}

pub fn stream_rng(trial_seed: u64, stream: Stream) -> SimRng {
    rng_from_seed(stream_seed(trial_seed, stream))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, trial: u64, stream: Stream) -> SimRng {
    rng_from_seed(derive_seed(master, trial, stream))
}
