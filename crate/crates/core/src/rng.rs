//! Replayable random streams.
//!
//! Every draw in a simulation comes from a stream addressed by
//! `(seed, sample, purpose, step)`. The key is derived from the seed and the
//! sample index, the ChaCha stream id from the purpose, and the word position
//! from the step, so any symbol of any episode can be regenerated on its own
//! and parallel episodes never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Values are the ChaCha stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Channel = 1,
    Payload = 2,
    Noise = 3,
    Partition = 4,
    Preamble = 5,
    Scatter = 6,
}

/// Sample index reserved for streams shared by every episode of a run.
pub const SHARED_SAMPLE: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, sample: u64, purpose: Purpose, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ splitmix64(sample ^ 0xA5A5_A5A5_5A5A_5A5A);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    // 2^32 words per step is far more than one OFDM symbol consumes.
    rng.set_word_pos(u128::from(step) << 32);
    rng
}
