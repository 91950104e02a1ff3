//! Index-addressable streams of uniform `(U, V)` pairs.
//!
//! Every pair is a pure function of `(seed, stream_id, index)`, so a worker can
//! rewind to its committed position and replay exactly the numbers it read
//! before. The generator is ChaCha8 in counter mode: the seed keys the cipher,
//! the stream id selects the nonce, and pair `n` occupies words `4n..4n+4` of
//! the keystream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name recorded in run metadata.
pub const GENERATOR_NAME: &str = "chacha8-counter/v1";

/// Stream id reserved for single-worker sequential runs.
pub const SEQUENTIAL_STREAM: u64 = u64::MAX;

/// Stream id reserved for random initial configurations.
pub const INIT_STREAM: u64 = u64::MAX - 1;

const WORDS_PER_PAIR: u128 = 4;

/// A uniform pair; both coordinates lie strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub u: f64,
    pub v: f64,
}

/// Maps 64 random bits to the open interval: the top 52 bits, offset by half a
/// step, so neither endpoint is reachable.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[derive(Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    cursor: u64,
    committed: u64,
    high_water: u64,
    rng: ChaCha8Rng,
    rng_pair: u64,
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream")
            .field("seed", &self.seed)
            .field("stream_id", &self.stream_id)
            .field("cursor", &self.cursor)
            .field("committed", &self.committed)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPosition {
    pub cursor: u64,
    pub committed: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream {
            seed,
            stream_id,
            cursor: 0,
            committed: 0,
            high_water: 0,
            rng: keyed(seed, stream_id),
            rng_pair: 0,
        }
    }

    pub fn sequential(seed: u64) -> Self {
        Self::new(seed, SEQUENTIAL_STREAM)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn committed(&self) -> u64 {
        self.committed
    }

    /// One past the largest pair index ever read through `next_pair`.
    pub fn high_water(&self) -> u64 {
        self.high_water
    }

    pub fn position(&self) -> StreamPosition {
        StreamPosition {
            cursor: self.cursor,
            committed: self.committed,
        }
    }

    /// The pair at `index`. Does not move the cursor.
    pub fn pair_at(&self, index: u64) -> Pair {
        let mut rng = keyed(self.seed, self.stream_id);
        rng.set_word_pos(index as u128 * WORDS_PER_PAIR);
        draw(&mut rng)
    }

    pub fn next_pair(&mut self) -> Pair {
        if self.rng_pair != self.cursor {
            self.rng.set_word_pos(self.cursor as u128 * WORDS_PER_PAIR);
            self.rng_pair = self.cursor;
        }
        let pair = draw(&mut self.rng);
        self.cursor += 1;
        self.rng_pair += 1;
        self.high_water = self.high_water.max(self.cursor);
        pair
    }

    pub fn reset_to(&mut self, index: u64) {
        self.cursor = index;
    }

    /// Marks `consumed` further pairs as owned by committed history and rewinds
    /// the cursor to the first unconsumed pair.
    pub fn commit(&mut self, consumed: u64) {
        self.committed += consumed;
        self.cursor = self.committed;
    }

    /// Abandons every pair read but not committed; the next read starts past
    /// anything handed out so far. Returns the number of pairs skipped.
    pub fn skip_to_fresh(&mut self) -> u64 {
        let skipped = self.high_water.saturating_sub(self.committed);
        self.committed = self.committed.max(self.high_water);
        self.cursor = self.committed;
        skipped
    }
}

fn keyed(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

fn draw(rng: &mut ChaCha8Rng) -> Pair {
    let u = open_unit(rng.next_u64());
    let v = open_unit(rng.next_u64());
    Pair { u, v }
}
