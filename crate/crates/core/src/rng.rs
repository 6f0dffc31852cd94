//! Seeded random streams.
//!
//! Every consumer derives its generator from `(seed, domain, index)`, so work
//! split into partitions draws the same numbers regardless of how partitions
//! are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams of different consumers disjoint under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    TrainData = 1,
    TestCoeffs = 2,
    TestOracle = 3,
    MonteCarlo = 4,
    Shuffle = 5,
    Init = 6,
    Samples = 7,
}

/// Returns the generator for partition `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, domain as u64));
    rng.set_stream(index);
    rng
}

// splitmix64 finalizer over the seed/domain pair
fn mix(seed: u64, domain: u64) -> u64 {
    let mut z = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
