use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Position in a splittable family of random streams.
///
/// `(master, index)` selects the ChaCha8 stream `index` under the key
/// expanded from `master`, so distinct indices never share keystream.
/// [`SeedStream::seed`] draws the first word of that stream and is what
/// every constructor in the crate consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub master: u64,
    pub index: u64,
}

impl SeedStream {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }

    pub fn seed(&self) -> u64 {
        self.rng().next_u64()
    }

    /// Sub-stream `index` keyed by this stream's seed.
    pub fn child(&self, index: u64) -> SeedStream {
        SeedStream::new(self.seed(), index)
    }
}

/// Generator used by every seeded constructor.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeds for trial `trial` under `master`: sub-stream 0 drives the instance,
/// sub-stream 1 the sketch.
pub fn trial_seeds(master: u64, trial: u64) -> (u64, u64) {
    let t = SeedStream::new(master, trial);
    (t.child(0).seed(), t.child(1).seed())
}
