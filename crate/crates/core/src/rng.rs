//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator. Its 256-bit key is the SplitMix64
//! expansion of `seed ^ fnv1a64(purpose)`, so different purposes drawn from
//! the same user seed are independent and reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `purpose` derived from `seed`.
pub fn stream(seed: u64, purpose: &str) -> Rng {
    let mut state = seed ^ fnv1a64(purpose.as_bytes());
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Sub-stream keyed by an integer index, e.g. one per trial or per step.
pub fn substream(seed: u64, purpose: &str, index: u64) -> Rng {
    stream(splitmix64(&mut (seed ^ index.rotate_left(32))), purpose)
}
