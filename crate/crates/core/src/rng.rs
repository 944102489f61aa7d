//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose key is
//! a pure function of `(master seed, domain, a, b)`. A task can therefore
//! rebuild its own stream without touching shared state, which keeps results
//! identical no matter how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share keys for the same indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    SubsamplePlan = 1,
    SubsampleColumn = 2,
    Permutation = 3,
    Replicate = 4,
    Confounders = 5,
    Treatment = 6,
    Outcome = 7,
    Synthesis = 8,
    Mediator = 9,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the coordinates of a stream into a single 64-bit key.
pub fn derive_seed(master: u64, domain: Domain, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ (domain as u64).wrapping_mul(GOLDEN));
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(32))
}

/// Generator for stream `(master, domain, a, b)`.
pub fn stream(master: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let k = derive_seed(master, domain, a, b);
    let mut key = [0u8; 32];
    let mut state = k;
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
