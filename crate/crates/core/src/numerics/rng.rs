//! Hierarchical, platform-independent random streams.
//!
//! A stream is a 32-byte key. `fork` derives a child key as
//! `SHA-256(parent key || tag || label bytes)` and `rng` seeds a ChaCha20
//! generator with the key. ChaCha20 output and SHA-256 are fully specified,
//! so draws are identical on every platform and golden CSVs stay portable.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"mbmimo/rng-stream/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label<'a> {
    Name(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Name(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label<'_> {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct RngStream {
    key: [u8; 32],
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RngStream({:02x}{:02x}{:02x}{:02x}..)", self.key[0], self.key[1], self.key[2], self.key[3])
    }
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(seed.to_le_bytes());
        RngStream { key: h.finalize().into() }
    }

    pub fn fork<'a>(&self, label: impl Into<Label<'a>>) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        match label.into() {
            Label::Name(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Index(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
        }
        RngStream { key: h.finalize().into() }
    }

    /// Shorthand for a chain of forks.
    pub fn path<'a, I, L>(&self, labels: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: Into<Label<'a>>,
    {
        labels.into_iter().fold(self.clone(), |s, l| s.fork(l))
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.key)
    }

    /// First 64-bit draw, used to derive child seeds.
    pub fn derive_seed(&self) -> u64 {
        self.rng().next_u64()
    }
}
