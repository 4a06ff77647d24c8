//! CL-style anonymous credentials over a strong-RSA modulus.
//!
//! A credential is the signature `(A, e, v)` on the holder secret `k` and the
//! attribute messages `m_1..m_L`:
//!
//! ```text
//! Z ≡ A^e · S^v · R_0^k · ∏ R_i^{m_i}  (mod n)
//! ```
//!
//! Issuance is blinded: the holder commits to `k` as `U = S^{v'} R_0^k` and
//! proves knowledge of the opening, so the issuer never sees `k`. Each
//! presentation re-randomizes `A` and proves knowledge of the signature and
//! every hidden message with a Fiat-Shamir sigma protocol bound to a
//! verifier nonce and request context.

mod arith;
pub mod hexint;
mod issuance;
mod keys;
mod params;
mod presentation;
mod transcript;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use arith::{gen_safe_prime, is_probable_prime, mod_inverse, pow_signed};
pub use issuance::{
    begin_issuance, complete_credential, issue, Credential, CredentialMetadata,
    HolderIssuanceState, IssuanceRequest, PreCredential,
};
pub use keys::{
    holder_keygen, setup_issuer, setup_issuer_with_primes, HolderSecret, IssuerPublicKey,
    IssuerSecretKey,
};
pub use params::{SystemParams, SUPPORTED_MODULUS_BITS};
pub use presentation::{
    leaked_secrets, present, verify_presentation, DisclosedClaim, HiddenResponse, Presentation,
    PresentationProof, VerifiedClaims,
};
pub use transcript::{encode_claim, ISSUE_TAG, PRESENT_TAG};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbcError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("proof invalid")]
    ProofInvalid,
    #[error("attribute encoding failed: {0}")]
    Encoding(String),
    #[error("signature does not satisfy the verification equation")]
    SignatureInvalid,
    #[error("bad disclosure index: {0}")]
    Index(String),
    #[error("nonce does not match the expected nonce")]
    NonceMismatch,
    #[error("context does not match the expected context")]
    ContextMismatch,
    #[error("response {0} exceeds its length bound")]
    LengthCheckFailed(&'static str),
    #[error("malformed key: {0}")]
    KeyInvalid(String),
}

impl AbcError {
    /// Stable error code for CLI output and access traces.
    pub fn code(&self) -> &'static str {
        match self {
            AbcError::Parameter(_) => "ParameterError",
            AbcError::ProofInvalid => "ProofInvalid",
            AbcError::Encoding(_) => "EncodingError",
            AbcError::SignatureInvalid => "SignatureInvalid",
            AbcError::Index(_) => "IndexError",
            AbcError::NonceMismatch => "NonceMismatch",
            AbcError::ContextMismatch => "ContextMismatch",
            AbcError::LengthCheckFailed(_) => "LengthCheckFailed",
            AbcError::KeyInvalid(_) => "KeyInvalid",
        }
    }
}

/// 16-byte freshness value, written as 32 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Nonce(pub [u8; 16]);

impl Nonce {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        Nonce(bytes)
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({self})")
    }
}

impl FromStr for Nonce {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(format!("nonce must be 32 lowercase hex characters, got {s:?}"));
        }
        let mut bytes = [0u8; 16];
        hex::decode_to_slice(s, &mut bytes).map_err(|e| e.to_string())?;
        Ok(Nonce(bytes))
    }
}

impl Serialize for Nonce {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Nonce {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
