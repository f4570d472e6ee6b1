//! Deterministic substream derivation.
//!
//! Every stochastic step of the library draws from a `ChaCha8Rng` seeded by
//! hashing a master seed together with a small integer path (iteration, trial
//! index, purpose tag, ...). Work items can then run in any order, or in
//! parallel, and still produce bit-identical output for a given seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep substreams for different sampler phases disjoint.
#[derive(Debug, Clone, Copy)]
pub enum StreamTag {
    Init,
    LatentTimes,
    Gibbs,
    ProbField,
    Simulate,
}

impl StreamTag {
    fn id(self) -> u64 {
        match self {
            StreamTag::Init => 0x01,
            StreamTag::LatentTimes => 0x02,
            StreamTag::Gibbs => 0x03,
            StreamTag::ProbField => 0x04,
            StreamTag::Simulate => 0x05,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent generator from `(seed, tag, path)`.
pub fn substream(seed: u64, tag: StreamTag, path: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let mut absorb = |w: u64| {
        state ^= w.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let _ = splitmix64(&mut state);
    };
    absorb(tag.id());
    absorb(path.len() as u64);
    for &w in path {
        absorb(w);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
