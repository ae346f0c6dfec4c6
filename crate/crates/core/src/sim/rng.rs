//! Label-keyed random streams.
//!
//! Every stream is a ChaCha8 keystream whose key is derived from the global
//! seed and a text label. Adding a new label never shifts draws on existing
//! labels, so new nodes or sessions leave old transcripts untouched.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
    /// Unused bits of the last word drawn by [`RandomStream::bit`].
    bit_cache: u64,
    cached_bits: u32,
}

impl RandomStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(b"soqn-stream\0");
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            seed,
            label,
            rng: ChaCha8Rng::from_seed(key),
            bit_cache: 0,
            cached_bits: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of 32-bit words drawn from the keystream so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// A derived stream that shares this stream's seed.
    pub fn child(&self, suffix: &str) -> RandomStream {
        RandomStream::new(self.seed, format!("{}/{}", self.label, suffix))
    }

    /// Fair coin. Consumes one bit of a buffered 64-bit word.
    #[inline]
    pub fn bit(&mut self) -> bool {
        if self.cached_bits == 0 {
            self.bit_cache = self.rng.next_u64();
            self.cached_bits = 64;
        }
        let b = self.bit_cache & 1 == 1;
        self.bit_cache >>= 1;
        self.cached_bits -= 1;
        b
    }

    /// Bernoulli draw from one 32-bit word, so `p` resolves to 2^-32.
    /// `p` outside `[0, 1]` is clamped.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        (self.rng.next_u32() as f64) < p * 4_294_967_296.0
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
