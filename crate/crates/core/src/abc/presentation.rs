//! Selective-disclosure presentations.
//!
//! The holder re-randomizes `A' = A·S^{r}`, sets `v̄ = v - e·r`, and proves
//! knowledge of `(e, v̄, k, {m_i}_{i∉D})` with
//!
//! ```text
//! Z_D = Z · ∏_{i∈D} R_i^{-m_i} ≡ A'^e · S^{v̄} · R_0^k · ∏_{i∉D} R_i^{m_i}  (mod n)
//! ```
//!
//! The commitment `T` is not transmitted; the verifier recomputes it from
//! the responses and the challenge and re-derives the challenge.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::arith::{multi_pow, random_bits, random_signed};
use super::hexint;
use super::issuance::Credential;
use super::keys::{HolderSecret, IssuerPublicKey};
use super::transcript::{encode_claim, Transcript, PRESENT_TAG};
use super::{AbcError, Nonce};
use crate::model::{is_token, Claim};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedClaim {
    pub index: usize,
    pub claim: Claim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenResponse {
    pub index: usize,
    #[serde(with = "hexint::int")]
    pub response: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationProof {
    #[serde(with = "hexint::uint")]
    pub c: BigUint,
    #[serde(with = "hexint::int")]
    pub s_e: BigInt,
    #[serde(with = "hexint::int")]
    pub s_v: BigInt,
    #[serde(with = "hexint::int")]
    pub s_k: BigInt,
    pub s_hidden: Vec<HiddenResponse>,
}

/// One-show transcript. `disclosed` and `proof.s_hidden` are sorted by
/// attribute index and partition `1..=L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    #[serde(with = "hexint::uint")]
    pub a_prime: BigUint,
    pub disclosed: Vec<DisclosedClaim>,
    pub proof: PresentationProof,
    pub nonce: Nonce,
    pub context: String,
    pub issuer_id: String,
    pub schema_id: String,
}

/// Claims a verifier accepted, keyed by attribute index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedClaims {
    pub issuer_id: String,
    pub schema_id: String,
    pub claims: BTreeMap<usize, Claim>,
}

impl VerifiedClaims {
    pub fn claim_set(&self) -> BTreeSet<Claim> {
        self.claims.values().cloned().collect()
    }
}

struct Widths {
    e: usize,
    v: usize,
    m: usize,
}

fn mask_widths(pk: &IssuerPublicKey) -> Widths {
    let p = &pk.params;
    Widths {
        e: p.mask_bits(p.e_bits),
        v: p.mask_bits(p.v_bar_bits()),
        m: p.mask_bits(p.message_bits),
    }
}

#[allow(clippy::too_many_arguments)]
fn presentation_challenge(
    pk: &IssuerPublicKey,
    issuer_id: &str,
    schema_id: &str,
    a_prime: &BigUint,
    commitment: &BigUint,
    disclosed: &[DisclosedClaim],
    nonce: &Nonce,
    context: &str,
) -> BigUint {
    let mut t = Transcript::new(PRESENT_TAG);
    t.append_bytes(&pk.digest());
    t.append_str(issuer_id);
    t.append_str(schema_id);
    t.append_uint(a_prime);
    t.append_uint(commitment);
    t.append_u64(disclosed.len() as u64);
    for d in disclosed {
        t.append_u64(d.index as u64);
        t.append_bytes(&d.claim.canonical_bytes());
        t.append_str(d.claim.schema_id());
    }
    t.append_bytes(&nonce.0);
    t.append_str(context);
    t.challenge()
}

/// Builds a presentation disclosing the attributes at `disclose` (1-based).
pub fn present<R: RngCore + ?Sized>(
    pk: &IssuerPublicKey,
    cred: &Credential,
    hs: &HolderSecret,
    disclose: &BTreeSet<usize>,
    nonce: Nonce,
    context: &str,
    rng: &mut R,
) -> Result<Presentation, AbcError> {
    let count = cred.claims.len();
    if count != pk.attribute_count() {
        return Err(AbcError::Index(format!(
            "credential has {count} claims, key signs {}",
            pk.attribute_count()
        )));
    }
    if let Some(bad) = disclose.iter().find(|&&i| i == 0 || i > count) {
        return Err(AbcError::Index(format!("index {bad} outside 1..={count}")));
    }
    let p = &pk.params;
    let n = &pk.n;
    let widths = mask_widths(pk);
    let messages = cred.messages(p.message_bits);

    let r_a = random_bits(rng, p.modulus_bits + p.stat_bits);
    let a_prime = &cred.a * pk.s.modpow(&r_a, n) % n;
    let v_bar = BigInt::from(cred.v.clone()) - BigInt::from(&cred.e * &r_a);

    let e_mask = random_signed(rng, widths.e);
    let v_mask = random_signed(rng, widths.v);
    let k_mask = random_signed(rng, widths.m);
    let hidden: Vec<usize> = (1..=count).filter(|i| !disclose.contains(i)).collect();
    let m_masks: Vec<BigInt> = hidden.iter().map(|_| random_signed(rng, widths.m)).collect();

    let mut terms = vec![(&a_prime, &e_mask), (&pk.s, &v_mask), (&pk.r[0], &k_mask)];
    terms.extend(hidden.iter().zip(&m_masks).map(|(&i, mask)| (&pk.r[i], mask)));
    let commitment = multi_pow(&terms, n).ok_or(AbcError::SignatureInvalid)?;

    let disclosed: Vec<DisclosedClaim> = disclose
        .iter()
        .map(|&i| DisclosedClaim {
            index: i,
            claim: cred.claims[i - 1].clone(),
        })
        .collect();
    let issuer_id = cred.metadata.issuer_id.clone();
    let schema_id = cred.metadata.schema_id.clone();
    let c = presentation_challenge(
        pk, &issuer_id, &schema_id, &a_prime, &commitment, &disclosed, &nonce, context,
    );
    let ci = BigInt::from(c.clone());
    let respond = |mask: &BigInt, secret: BigInt| mask + &ci * secret;

    let proof = PresentationProof {
        s_e: respond(&e_mask, BigInt::from(cred.e.clone())),
        s_v: respond(&v_mask, v_bar),
        s_k: respond(&k_mask, BigInt::from(hs.k.clone())),
        s_hidden: hidden
            .iter()
            .zip(&m_masks)
            .map(|(&i, mask)| HiddenResponse {
                index: i,
                response: respond(mask, BigInt::from(messages[i - 1].clone())),
            })
            .collect(),
        c,
    };
    Ok(Presentation {
        a_prime,
        disclosed,
        proof,
        nonce,
        context: context.to_owned(),
        issuer_id,
        schema_id,
    })
}

fn check_structure(pk: &IssuerPublicKey, pres: &Presentation) -> Result<(), AbcError> {
    if pres.issuer_id != pk.issuer_id || !is_token(&pres.schema_id) {
        return Err(AbcError::ProofInvalid);
    }
    let count = pk.attribute_count();
    let disclosed: Vec<usize> = pres.disclosed.iter().map(|d| d.index).collect();
    let hidden: Vec<usize> = pres.proof.s_hidden.iter().map(|h| h.index).collect();
    let strictly_increasing = |xs: &[usize]| xs.windows(2).all(|w| w[0] < w[1]);
    let mut all: Vec<usize> = disclosed.iter().chain(&hidden).copied().collect();
    all.sort_unstable();
    let partition = strictly_increasing(&disclosed)
        && strictly_increasing(&hidden)
        && all == (1..=count).collect::<Vec<_>>();
    if !partition {
        return Err(AbcError::ProofInvalid);
    }
    let claims_ok = pres
        .disclosed
        .iter()
        .all(|d| d.claim.issuer_id() == pk.issuer_id && d.claim.schema_id() == pres.schema_id);
    if !claims_ok {
        return Err(AbcError::ProofInvalid);
    }
    Ok(())
}

fn check_lengths(pk: &IssuerPublicKey, proof: &PresentationProof) -> Result<(), AbcError> {
    let widths = mask_widths(pk);
    let within = |x: &BigInt, bits: usize| x.abs() < (BigInt::one() << (bits + 1));
    if proof.c.bits() as usize > pk.params.hash_bits {
        return Err(AbcError::LengthCheckFailed("c"));
    }
    if !within(&proof.s_e, widths.e) {
        return Err(AbcError::LengthCheckFailed("s_e"));
    }
    if !within(&proof.s_v, widths.v) {
        return Err(AbcError::LengthCheckFailed("s_v"));
    }
    if !within(&proof.s_k, widths.m) {
        return Err(AbcError::LengthCheckFailed("s_k"));
    }
    if proof.s_hidden.iter().any(|h| !within(&h.response, widths.m)) {
        return Err(AbcError::LengthCheckFailed("s_hidden"));
    }
    Ok(())
}

/// `T = A'^{ŝ_e} S^{ŝ_v} R_0^{ŝ_k} ∏ R_i^{ŝ_i} · Z_D^{-c}`. The holder term
/// can be dropped to show the ownership check is load-bearing.
fn reconstruct_commitment(
    pk: &IssuerPublicKey,
    pres: &Presentation,
    include_holder_term: bool,
) -> Option<BigUint> {
    let n = &pk.n;
    let p = &pk.params;
    let disclosed_exps: Vec<BigInt> = pres
        .disclosed
        .iter()
        .map(|d| -BigInt::from(encode_claim(&d.claim, p.message_bits)))
        .collect();
    let one = BigInt::one();
    let mut z_terms = vec![(&pk.z, &one)];
    z_terms.extend(pres.disclosed.iter().zip(&disclosed_exps).map(|(d, m)| (&pk.r[d.index], m)));
    let z_d = multi_pow(&z_terms, n)?;

    let minus_c = -BigInt::from(pres.proof.c.clone());
    let mut terms = vec![
        (&pres.a_prime, &pres.proof.s_e),
        (&pk.s, &pres.proof.s_v),
        (&z_d, &minus_c),
    ];
    if include_holder_term {
        terms.push((&pk.r[0], &pres.proof.s_k));
    }
    terms.extend(pres.proof.s_hidden.iter().map(|h| (&pk.r[h.index], &h.response)));
    multi_pow(&terms, n)
}

fn check_equation(
    pk: &IssuerPublicKey,
    pres: &Presentation,
    include_holder_term: bool,
) -> Result<(), AbcError> {
    if pres.a_prime <= BigUint::one() || pres.a_prime >= pk.n || !pres.a_prime.gcd(&pk.n).is_one() {
        return Err(AbcError::ProofInvalid);
    }
    let commitment =
        reconstruct_commitment(pk, pres, include_holder_term).ok_or(AbcError::ProofInvalid)?;
    let c = presentation_challenge(
        pk,
        &pres.issuer_id,
        &pres.schema_id,
        &pres.a_prime,
        &commitment,
        &pres.disclosed,
        &pres.nonce,
        &pres.context,
    );
    if c != pres.proof.c {
        return Err(AbcError::ProofInvalid);
    }
    Ok(())
}

/// Accepts a presentation made for `expected_nonce` and `expected_context`
/// and returns exactly its disclosed claims.
pub fn verify_presentation(
    pk: &IssuerPublicKey,
    pres: &Presentation,
    expected_nonce: &Nonce,
    expected_context: &str,
) -> Result<VerifiedClaims, AbcError> {
    if &pres.nonce != expected_nonce {
        return Err(AbcError::NonceMismatch);
    }
    if pres.context != expected_context {
        return Err(AbcError::ContextMismatch);
    }
    check_structure(pk, pres)?;
    check_lengths(pk, &pres.proof)?;
    check_equation(pk, pres, true)?;
    Ok(VerifiedClaims {
        issuer_id: pres.issuer_id.clone(),
        schema_id: pres.schema_id.clone(),
        claims: pres.disclosed.iter().map(|d| (d.index, d.claim.clone())).collect(),
    })
}

/// Labels of the secrets whose lowercase hex form occurs in `serialized`:
/// `A`, `e`, `v`, `k`, and each message not in `disclosed`.
pub fn leaked_secrets(
    serialized: &[u8],
    cred: &Credential,
    hs: &HolderSecret,
    disclosed: &BTreeSet<usize>,
    message_bits: usize,
) -> Vec<String> {
    let text = String::from_utf8_lossy(serialized);
    let mut secrets = vec![
        ("A".to_owned(), cred.a.clone()),
        ("e".to_owned(), cred.e.clone()),
        ("v".to_owned(), cred.v.clone()),
        ("k".to_owned(), hs.k.clone()),
    ];
    for (i, m) in cred.messages(message_bits).into_iter().enumerate() {
        if !disclosed.contains(&(i + 1)) {
            secrets.push((format!("m{}", i + 1), m));
        }
    }
    secrets
        .into_iter()
        .filter(|(_, x)| text.contains(&x.to_str_radix(16)))
        .map(|(label, _)| label)
        .collect()
}
