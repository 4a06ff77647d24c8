//! Blinded issuance: the holder commits to its secret, the issuer signs the
//! commitment together with the claims, the holder completes the signature.

use chrono::NaiveDate;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::arith::{gen_prime_in_interval, mod_inverse, multi_pow, random_bits, random_signed};
use super::hexint;
use super::keys::{HolderSecret, IssuerPublicKey, IssuerSecretKey};
use super::transcript::{encode_claim, Transcript, ISSUE_TAG};
use super::{AbcError, Nonce};
use crate::model::{check_token, Claim};

/// Holder commitment `U = S^{v'} R_0^k` with a proof of knowledge of
/// `(v', k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuanceRequest {
    #[serde(with = "hexint::uint")]
    pub u: BigUint,
    #[serde(with = "hexint::uint")]
    pub c: BigUint,
    #[serde(with = "hexint::int")]
    pub s_v_prime: BigInt,
    #[serde(with = "hexint::int")]
    pub s_k: BigInt,
    pub nonce: Nonce,
}

/// What the holder keeps between request and completion.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolderIssuanceState {
    #[serde(with = "hexint::uint")]
    pub(crate) v_prime: BigUint,
    pub nonce: Nonce,
}

impl std::fmt::Debug for HolderIssuanceState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HolderIssuanceState").field("nonce", &self.nonce).finish_non_exhaustive()
    }
}

impl HolderIssuanceState {
    pub fn v_prime(&self) -> &BigUint {
        &self.v_prime
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialMetadata {
    pub issuer_id: String,
    pub schema_id: String,
    pub issued_at: NaiveDate,
    pub expires_at: Option<NaiveDate>,
    pub credential_id: String,
}

/// Issuer output; the holder adds `v'` to `v''` to finish the signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreCredential {
    #[serde(with = "hexint::uint")]
    pub a: BigUint,
    #[serde(with = "hexint::uint")]
    pub e: BigUint,
    #[serde(with = "hexint::uint")]
    pub v_double_prime: BigUint,
    pub claims: Vec<Claim>,
    pub metadata: CredentialMetadata,
}

/// Holder-secret binding, claims, signature `(A, e, v)` and metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    #[serde(with = "hexint::uint")]
    pub a: BigUint,
    #[serde(with = "hexint::uint")]
    pub e: BigUint,
    #[serde(with = "hexint::uint")]
    pub v: BigUint,
    pub claims: Vec<Claim>,
    pub metadata: CredentialMetadata,
}

impl Credential {
    pub fn id(&self) -> &str {
        &self.metadata.credential_id
    }

    /// Encoded attribute messages `m_1..m_L`.
    pub fn messages(&self, message_bits: usize) -> Vec<BigUint> {
        self.claims.iter().map(|c| encode_claim(c, message_bits)).collect()
    }

    /// `true` when `Z ≡ A^e S^v R_0^k ∏ R_i^{m_i} (mod n)`.
    pub fn satisfies_equation(&self, pk: &IssuerPublicKey, hs: &HolderSecret) -> bool {
        signature_equation_holds(pk, &self.a, &self.e, &self.v, &hs.k, &self.messages(pk.params.message_bits))
    }
}

fn signature_equation_holds(
    pk: &IssuerPublicKey,
    a: &BigUint,
    e: &BigUint,
    v: &BigUint,
    k: &BigUint,
    messages: &[BigUint],
) -> bool {
    if messages.len() != pk.attribute_count() {
        return false;
    }
    let n = &pk.n;
    let mut lhs = a.modpow(e, n) * pk.s.modpow(v, n) % n;
    lhs = lhs * pk.r[0].modpow(k, n) % n;
    for (r, m) in pk.r[1..].iter().zip(messages) {
        lhs = lhs * r.modpow(m, n) % n;
    }
    lhs == pk.z
}

fn issuance_challenge(pk: &IssuerPublicKey, u: &BigUint, commitment: &BigUint, nonce: &Nonce) -> BigUint {
    let mut t = Transcript::new(ISSUE_TAG);
    t.append_bytes(&pk.digest());
    t.append_uint(u);
    t.append_uint(commitment);
    t.append_bytes(&nonce.0);
    t.challenge()
}

pub fn begin_issuance<R: RngCore + ?Sized>(
    pk: &IssuerPublicKey,
    hs: &HolderSecret,
    issuer_nonce: Nonce,
    rng: &mut R,
) -> (IssuanceRequest, HolderIssuanceState) {
    let p = &pk.params;
    let n = &pk.n;
    let v_prime = random_bits(rng, p.modulus_bits + p.stat_bits);
    let u = pk.s.modpow(&v_prime, n) * pk.r[0].modpow(&hs.k, n) % n;

    let v_mask = random_signed(rng, p.mask_bits(p.modulus_bits + p.stat_bits));
    let k_mask = random_signed(rng, p.mask_bits(p.message_bits));
    let commitment = multi_pow(&[(&pk.s, &v_mask), (&pk.r[0], &k_mask)], n)
        .expect("S and R_0 are units");
    let c = issuance_challenge(pk, &u, &commitment, &issuer_nonce);
    let ci = BigInt::from(c.clone());
    let request = IssuanceRequest {
        u,
        s_v_prime: v_mask + &ci * BigInt::from(v_prime.clone()),
        s_k: k_mask + &ci * BigInt::from(hs.k.clone()),
        c,
        nonce: issuer_nonce,
    };
    (request, HolderIssuanceState { v_prime, nonce: issuer_nonce })
}

/// Issuer-side check of the holder's commitment proof.
pub(crate) fn verify_issuance_request(
    pk: &IssuerPublicKey,
    req: &IssuanceRequest,
    expected_nonce: &Nonce,
) -> Result<(), AbcError> {
    if &req.nonce != expected_nonce {
        return Err(AbcError::NonceMismatch);
    }
    let p = &pk.params;
    let bound = |bits: usize| BigInt::one() << (bits + 1);
    if req.c.bits() as usize > p.hash_bits {
        return Err(AbcError::LengthCheckFailed("c"));
    }
    if req.s_v_prime.abs() >= bound(p.mask_bits(p.modulus_bits + p.stat_bits)) {
        return Err(AbcError::LengthCheckFailed("s_v_prime"));
    }
    if req.s_k.abs() >= bound(p.mask_bits(p.message_bits)) {
        return Err(AbcError::LengthCheckFailed("s_k"));
    }
    if req.u <= BigUint::one() || req.u >= pk.n || !req.u.gcd(&pk.n).is_one() {
        return Err(AbcError::ProofInvalid);
    }
    let minus_c = -BigInt::from(req.c.clone());
    let commitment = multi_pow(
        &[(&req.u, &minus_c), (&pk.s, &req.s_v_prime), (&pk.r[0], &req.s_k)],
        &pk.n,
    )
    .ok_or(AbcError::ProofInvalid)?;
    if issuance_challenge(pk, &req.u, &commitment, &req.nonce) != req.c {
        return Err(AbcError::ProofInvalid);
    }
    Ok(())
}

/// Signs the holder's commitment together with `claims`.
pub fn issue<R: RngCore + ?Sized>(
    sk: &IssuerSecretKey,
    pk: &IssuerPublicKey,
    req: &IssuanceRequest,
    expected_nonce: &Nonce,
    claims: Vec<Claim>,
    metadata: CredentialMetadata,
    rng: &mut R,
) -> Result<PreCredential, AbcError> {
    verify_issuance_request(pk, req, expected_nonce)?;
    check_claims(pk, &claims, &metadata)?;

    let p = &pk.params;
    let n = &pk.n;
    let order = sk.group_order();
    let e_start = BigUint::one() << (p.e_bits - 1);
    let (e, e_inverse) = loop {
        let e = gen_prime_in_interval(rng, &e_start, p.e_interval_bits);
        if let Some(inv) = mod_inverse(&e, &order) {
            break (e, inv);
        }
    };
    let v_double_prime = random_bits(rng, p.v_bits - 1);

    let mut denominator = &req.u * pk.s.modpow(&v_double_prime, n) % n;
    for (r, claim) in pk.r[1..].iter().zip(&claims) {
        denominator = denominator * r.modpow(&encode_claim(claim, p.message_bits), n) % n;
    }
    let inverse = mod_inverse(&denominator, n).ok_or(AbcError::ProofInvalid)?;
    let q = &pk.z * inverse % n;
    let a = q.modpow(&e_inverse, n);

    Ok(PreCredential {
        a,
        e,
        v_double_prime,
        claims,
        metadata,
    })
}

fn check_claims(
    pk: &IssuerPublicKey,
    claims: &[Claim],
    metadata: &CredentialMetadata,
) -> Result<(), AbcError> {
    let enc = |msg: String| Err(AbcError::Encoding(msg));
    if claims.len() != pk.attribute_count() {
        return enc(format!(
            "key signs {} attributes, got {} claims",
            pk.attribute_count(),
            claims.len()
        ));
    }
    if metadata.issuer_id != pk.issuer_id {
        return enc(format!("metadata issuer {:?} is not {:?}", metadata.issuer_id, pk.issuer_id));
    }
    for id in [&metadata.schema_id, &metadata.credential_id] {
        check_token(id).map_err(|e| AbcError::Encoding(e.to_string()))?;
    }
    for claim in claims {
        if claim.issuer_id() != pk.issuer_id {
            return enc(format!("claim {:?} certified by another issuer", claim.name()));
        }
        if claim.schema_id() != metadata.schema_id {
            return enc(format!("claim {:?} has a different schema", claim.name()));
        }
    }
    Ok(())
}

/// Finishes the signature with `v = v' + v''` and checks the verification
/// equation before accepting it.
pub fn complete_credential(
    pk: &IssuerPublicKey,
    pre: PreCredential,
    state: &HolderIssuanceState,
    hs: &HolderSecret,
) -> Result<Credential, AbcError> {
    let p = &pk.params;
    let e_low = BigUint::one() << (p.e_bits - 1);
    let e_high = &e_low + (BigUint::one() << p.e_interval_bits);
    if pre.e < e_low || pre.e > e_high || pre.a >= pk.n {
        return Err(AbcError::SignatureInvalid);
    }
    let credential = Credential {
        a: pre.a,
        e: pre.e,
        v: &state.v_prime + pre.v_double_prime,
        claims: pre.claims,
        metadata: pre.metadata,
    };
    if !credential.satisfies_equation(pk, hs) {
        return Err(AbcError::SignatureInvalid);
    }
    Ok(credential)
}
