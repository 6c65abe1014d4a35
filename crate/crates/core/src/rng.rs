//! Seeded randomness.
//!
//! Every random decision in the harness flows from one user seed. Sub-streams
//! are derived by hashing the seed together with a purpose label, and drawn
//! from ChaCha8. Shuffling and bounded sampling are implemented here rather
//! than through `rand`'s helpers so the exact draw sequence is pinned to this
//! crate and does not move with `rand` releases:
//!
//! - `below(n)`: rejection sampling on 64-bit words, `x mod n` accepted when
//!   `x < 2^64 - (2^64 mod n)`.
//! - `shuffle`: Fisher-Yates from the last index down, `j = below(i + 1)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a sub-seed for `purpose` from a master seed.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn for_purpose(seed: u64, purpose: &str) -> Self {
        Self::new(derive_seed(seed, purpose))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.inner.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
