//! Counter-based random streams.
//!
//! Every random quantity in a simulation is read from a ChaCha8 stream that
//! is addressed, not advanced, so results do not depend on scheduling:
//!
//! * the 256-bit key is expanded from the master seed;
//! * the 64-bit stream id packs `purpose (4 bits) | replication (28 bits) | lane (32 bits)`;
//! * within a stream, draw `k` starts at 32-bit word `4k` (two `u64` per draw).
//!
//! The lane is the resampling attempt for point sampling and the AP index for
//! per-evaluation-point gains. Draw `k` of a per-evaluation-point gain stream is
//! pixel `k` of the raster, so any pixel's gain can be recomputed in isolation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words consumed per addressed draw.
const WORDS_PER_DRAW: u128 = 4;
const MAX_REPLICATION: u64 = (1 << 28) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Points = 1,
    Tiers = 2,
    ApGains = 3,
    PointGains = 4,
    Resampling = 5,
    Shift = 6,
}

/// Identifies one replication of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replication: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        assert!(
            replication <= MAX_REPLICATION,
            "replication index {replication} exceeds the 28-bit stream field"
        );
        Self {
            master_seed,
            replication,
        }
    }

    pub fn stream_id(&self, purpose: Purpose, lane: u32) -> u64 {
        ((purpose as u64) << 60) | (self.replication << 32) | lane as u64
    }

    /// Sequential stream positioned at draw 0.
    pub fn stream(&self, purpose: Purpose, lane: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(master_key(self.master_seed));
        rng.set_stream(self.stream_id(purpose, lane));
        rng
    }

    /// Stream positioned at addressed draw `index`.
    pub fn stream_at(&self, purpose: Purpose, lane: u32, index: u64) -> ChaCha8Rng {
        let mut rng = self.stream(purpose, lane);
        rng.set_word_pos(index as u128 * WORDS_PER_DRAW);
        rng
    }
}

fn master_key(master_seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(master_seed).get_seed()
}

/// Reads exactly two `u64` words: one addressed draw.
#[inline]
pub fn draw_pair<R: RngCore + ?Sized>(rng: &mut R) -> (u64, u64) {
    (rng.next_u64(), rng.next_u64())
}

/// Uniform on (0, 1], never zero.
#[inline]
pub fn open_unit(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on [0, 1).
#[inline]
pub fn half_open_unit(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller standard normal from one draw (both words consumed).
#[inline]
pub fn standard_normal(pair: (u64, u64)) -> f64 {
    let radius = (-2.0 * open_unit(pair.0).ln()).sqrt();
    radius * (std::f64::consts::TAU * half_open_unit(pair.1)).cos()
}
