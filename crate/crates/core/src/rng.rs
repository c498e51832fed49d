//! Keyed random streams.
//!
//! Every random draw in a simulation comes from a stream whose seed is a
//! hash of the global seed plus a key path such as
//! `("qd", timestep, tx, rx, tuple_hash, reflector)`. Results therefore do
//! not depend on the order in which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type RngStream = ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct StreamKey {
    hasher: Sha256,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"qdtrace-stream-v1");
        hasher.update(seed.to_le_bytes());
        StreamKey { hasher }
    }

    /// Appends a string component. Components are length-prefixed so
    /// `("ab","c")` and `("a","bc")` differ.
    pub fn with(mut self, part: &str) -> Self {
        self.hasher.update((part.len() as u64).to_le_bytes());
        self.hasher.update(part.as_bytes());
        self
    }

    pub fn with_u64(mut self, part: u64) -> Self {
        self.hasher.update([0xffu8]);
        self.hasher.update(part.to_le_bytes());
        self
    }

    pub fn stream(&self) -> RngStream {
        let seed: [u8; 32] = self.hasher.clone().finalize().into();
        ChaCha12Rng::from_seed(seed)
    }
}

/// Stable 64-bit identifier of a reflection tuple (FNV-1a over the indices).
pub fn tuple_hash(tuple: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for &i in tuple {
        for b in (i as u64).to_le_bytes() {
            eat(b);
        }
    }
    for b in (tuple.len() as u64).to_le_bytes() {
        eat(b);
    }
    h
}
