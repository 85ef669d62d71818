//! Seeded random streams.
//!
//! Every stream is ChaCha8 keyed by `ChaCha8Rng::seed_from_u64(root_seed)`
//! and separated by the ChaCha stream id, so consumers never perturb each
//! other. A stream's position is its 128-bit word counter, which is what
//! checkpoints store.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids by purpose.
pub mod purpose {
    pub const INIT: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const SAMPLING: u64 = 2;
    pub const DATA: u64 = 3;
    /// Per-image evaluation streams use `EVAL_BASE | (image index << 2) | sub`.
    pub const EVAL_BASE: u64 = 1 << 62;
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The three training streams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
    pub noise: ChaCha8Rng,
    pub sampling: ChaCha8Rng,
    pub data: ChaCha8Rng,
}

/// Stream positions, enough to restore [`RngStreams`] exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamPositions {
    pub seed: u64,
    pub noise: u128,
    pub sampling: u128,
    pub data: u128,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams {
            seed,
            noise: stream(seed, purpose::NOISE),
            sampling: stream(seed, purpose::SAMPLING),
            data: stream(seed, purpose::DATA),
        }
    }

    /// Independent noise/sampling pair for evaluating one image, so the
    /// result does not depend on evaluation order or thread count.
    pub fn for_eval(seed: u64, image_index: usize) -> Self {
        let base = purpose::EVAL_BASE | ((image_index as u64) << 2);
        RngStreams {
            seed,
            noise: stream(seed, base),
            sampling: stream(seed, base | 1),
            data: stream(seed, base | 2),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn positions(&self) -> StreamPositions {
        StreamPositions {
            seed: self.seed,
            noise: self.noise.get_word_pos(),
            sampling: self.sampling.get_word_pos(),
            data: self.data.get_word_pos(),
        }
    }

    pub fn restore(p: StreamPositions) -> Self {
        let mut s = Self::new(p.seed);
        s.noise.set_word_pos(p.noise);
        s.sampling.set_word_pos(p.sampling);
        s.data.set_word_pos(p.data);
        s
    }
}
