//! Deterministic random streams.
//!
//! Every random draw in a simulation comes from a ChaCha stream keyed by
//! `(master seed, purpose, drop index, trial index)`. Results therefore do not
//! depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used by every simulation loop.
pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Fading = 1,
    Normalization = 2,
    Drops = 3,
    Sampler = 4,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the generator for one `(purpose, drop, trial)` cell of a run.
pub fn stream(master: u64, purpose: Purpose, drop: u64, trial: u64) -> SimRng {
    let mut state = master;
    let mut key = [0u8; 32];
    let words = [
        splitmix64(&mut state) ^ purpose as u64,
        splitmix64(&mut state) ^ drop.rotate_left(17),
        splitmix64(&mut state) ^ trial.rotate_left(41),
        splitmix64(&mut state),
    ];
    // Second pass so that every key word depends on all three indices.
    let mut mix = words[0] ^ words[1].rotate_left(7) ^ words[2].rotate_left(13);
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        let v = w ^ splitmix64(&mut mix);
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Identifies one user drop within a seeded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamKey {
    pub seed: u64,
    pub drop: u64,
}

impl StreamKey {
    pub fn new(seed: u64, drop: u64) -> Self {
        Self { seed, drop }
    }

    pub fn trial(&self, purpose: Purpose, trial: u64) -> SimRng {
        stream(self.seed, purpose, self.drop, trial)
    }
}
