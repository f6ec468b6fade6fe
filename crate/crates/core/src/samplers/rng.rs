use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed to every sampling routine.
pub type StreamRng = ChaCha8Rng;

/// Draw-index tags separating the independent streams used per `(time, particle)`.
pub mod purpose {
    pub const INIT: u64 = 0;
    pub const FORWARD: u64 = 1;
    pub const BACKWARD: u64 = 2;
    pub const DATA: u64 = 3;
    pub const TEST: u64 = 0xFFFF;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `k`-th child seed of `seed` (used for independent replicates).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(k.wrapping_mul(GOLDEN).wrapping_add(1)))
}

/// Counter-based random stream keyed by `(seed, time_index, particle_index, draw_index)`.
///
/// The key is mapped injectively onto a ChaCha8 key and stream id, so every
/// counter tuple addresses its own generator and per-particle work can run in
/// any order (or in parallel) and still replay bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngStream {
    pub seed: u64,
    pub time_index: u64,
    pub particle_index: u64,
    pub draw_index: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, ..Default::default() }
    }

    pub fn at(self, time_index: u64, particle_index: u64, draw_index: u64) -> Self {
        RngStream { seed: self.seed, time_index, particle_index, draw_index }
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&splitmix64(self.seed).to_le_bytes());
        key[8..16].copy_from_slice(&self.time_index.to_le_bytes());
        key[16..24].copy_from_slice(&self.particle_index.to_le_bytes());
        key[24..32].copy_from_slice(&splitmix64(self.seed ^ GOLDEN).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.draw_index);
        rng
    }

    /// Shorthand for `self.at(time, particle, draw).rng()`.
    pub fn rng_at(&self, time_index: u64, particle_index: u64, draw_index: u64) -> StreamRng {
        self.at(time_index, particle_index, draw_index).rng()
    }
}
