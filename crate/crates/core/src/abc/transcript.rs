//! Fiat-Shamir transcripts and attribute encoding.
//!
//! Every absorbed element is a 4-byte big-endian length followed by its
//! bytes. Integers are a sign byte (0x00 non-negative, 0x01 negative)
//! followed by the minimal big-endian magnitude, which is empty for zero.

use num_bigint::BigUint;
use num_traits::Zero;
use sha2::{Digest, Sha256};

use crate::model::Claim;

pub const ISSUE_TAG: &str = "abcid/issue/v1";
pub const PRESENT_TAG: &str = "abcid/present/v1";
pub const PUBLIC_KEY_TAG: &str = "abcid/pk/v1";

pub struct Transcript {
    hasher: Sha256,
}

impl Transcript {
    pub fn new(tag: &str) -> Self {
        let mut t = Transcript {
            hasher: Sha256::new(),
        };
        t.append_bytes(tag.as_bytes());
        t
    }

    pub fn append_bytes(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u32).to_be_bytes());
        self.hasher.update(bytes);
    }

    pub fn append_str(&mut self, s: &str) {
        self.append_bytes(s.as_bytes());
    }

    pub fn append_uint(&mut self, x: &BigUint) {
        self.append_bytes(&uint_bytes(x));
    }

    pub fn append_u64(&mut self, x: u64) {
        self.append_uint(&BigUint::from(x));
    }

    pub fn finish(self) -> [u8; 32] {
        self.hasher.finalize().into()
    }

    /// The digest read as a 256-bit challenge integer.
    pub fn challenge(self) -> BigUint {
        BigUint::from_bytes_be(&self.finish())
    }
}

pub fn uint_bytes(x: &BigUint) -> Vec<u8> {
    let mut out = vec![0u8];
    if !x.is_zero() {
        out.extend(x.to_bytes_be());
    }
    out
}

/// Attribute message: the top `message_bits - 1` bits of SHA-256 over the
/// claim's canonical bytes.
pub fn encode_claim(claim: &Claim, message_bits: usize) -> BigUint {
    let digest = Sha256::digest(claim.canonical_bytes());
    let keep = (message_bits - 1).min(256);
    BigUint::from_bytes_be(&digest) >> (256 - keep)
}
