//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by `(seed, experiment)` and
//! selected by a 64-bit stream index, so any trial block can be regenerated
//! independently of how work was scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Trials per independently keyed block in parallel ensembles.
pub const BLOCK_SIZE: usize = 1 << 14;

/// Source of reproducible sub-streams for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
    experiment: u64,
}

impl Streams {
    pub fn new(seed: u64, experiment: &str) -> Self {
        Self {
            seed,
            experiment: fnv1a(experiment.as_bytes()),
        }
    }

    /// Derive a child experiment, e.g. one setting of a sweep.
    pub fn child(&self, label: &str, index: u64) -> Self {
        let mut bytes = self.experiment.to_le_bytes().to_vec();
        bytes.extend_from_slice(label.as_bytes());
        bytes.extend_from_slice(&index.to_le_bytes());
        Self {
            seed: self.seed,
            experiment: fnv1a(&bytes),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, index: u64) -> StreamRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// Run `n` trials in fixed-size blocks, each block on its own stream,
    /// and return the per-block results in block order.
    pub fn map_blocks<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut StreamRng, usize) -> T + Sync,
    {
        let blocks = n.div_ceil(BLOCK_SIZE);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = self.stream(b as u64);
                let len = BLOCK_SIZE.min(n - b * BLOCK_SIZE);
                f(&mut rng, len)
            })
            .collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
