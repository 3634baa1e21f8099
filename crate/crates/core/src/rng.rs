//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 stream derived from the run seed,
//! a domain and an index. Resuming a run therefore only needs the seed and the
//! iteration counter.

use rand::SeedableRng;

use crate::tape::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Init = 1,
    Dropout = 2,
    Shuffle = 3,
    Augment = 4,
    Synth = 5,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}
