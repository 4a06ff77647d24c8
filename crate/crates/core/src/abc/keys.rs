use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::arith::{self, gen_safe_prime, is_qr_mod_prime, random_range};
use super::hexint;
use super::params::SystemParams;
use super::transcript::{Transcript, PUBLIC_KEY_TAG};
use super::AbcError;
use crate::model::check_token;

/// Issuer public key. `r[0]` is reserved for the holder secret; `r[1..]`
/// carry the attributes, so a key signs `r.len() - 1` attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuerPublicKey {
    #[serde(with = "hexint::uint")]
    pub n: BigUint,
    #[serde(with = "hexint::uint")]
    pub s: BigUint,
    #[serde(with = "hexint::uint")]
    pub z: BigUint,
    #[serde(with = "hexint::uint_vec")]
    pub r: Vec<BigUint>,
    pub params: SystemParams,
    pub issuer_id: String,
}

impl IssuerPublicKey {
    pub fn attribute_count(&self) -> usize {
        self.r.len().saturating_sub(1)
    }

    /// SHA-256 over the key's framed components.
    pub fn digest(&self) -> [u8; 32] {
        let mut t = Transcript::new(PUBLIC_KEY_TAG);
        t.append_str(&self.issuer_id);
        let p = &self.params;
        for x in [
            p.modulus_bits,
            p.message_bits,
            p.e_bits,
            p.e_interval_bits,
            p.v_bits,
            p.stat_bits,
            p.hash_bits,
        ] {
            t.append_u64(x as u64);
        }
        t.append_uint(&self.n);
        t.append_uint(&self.s);
        t.append_uint(&self.z);
        t.append_u64(self.r.len() as u64);
        for r in &self.r {
            t.append_uint(r);
        }
        t.finish()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }

    /// Checks that need no secret: parameter relations, issuer id, and that
    /// every base lies in `[2, n-2]` and is a unit.
    pub fn check(&self) -> Result<(), AbcError> {
        self.params.validate()?;
        check_token(&self.issuer_id).map_err(|e| AbcError::KeyInvalid(e.to_string()))?;
        if self.r.len() < 2 {
            return Err(AbcError::KeyInvalid("key must sign at least one attribute".into()));
        }
        let two = BigUint::from(2u32);
        if self.n <= BigUint::from(4u32) || self.n.is_even() {
            return Err(AbcError::KeyInvalid("modulus must be odd and > 4".into()));
        }
        let upper = &self.n - 2u32;
        for base in [&self.s, &self.z].into_iter().chain(self.r.iter()) {
            if base < &two || base > &upper || !base.gcd(&self.n).is_one() {
                return Err(AbcError::KeyInvalid("base outside [2, n-2] or not a unit".into()));
            }
        }
        Ok(())
    }
}

/// Issuer secret key: the safe primes `p = 2p'+1`, `q = 2q'+1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuerSecretKey {
    #[serde(with = "hexint::uint")]
    pub p: BigUint,
    #[serde(with = "hexint::uint")]
    pub q: BigUint,
}

impl IssuerSecretKey {
    /// Validates that `p` and `q` are distinct safe primes `≡ 3 (mod 4)`.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self, AbcError> {
        // Primality bases only; no secret depends on this stream.
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let four = BigUint::from(4u32);
        for x in [&p, &q] {
            let half = (x - 1u32) >> 1;
            if x % &four != BigUint::from(3u32)
                || !arith::is_probable_prime(x, &mut rng)
                || !arith::is_probable_prime(&half, &mut rng)
            {
                return Err(AbcError::KeyInvalid(format!("{x} is not a safe prime ≡ 3 mod 4")));
            }
        }
        if p == q {
            return Err(AbcError::KeyInvalid("p and q must differ".into()));
        }
        Ok(IssuerSecretKey { p, q })
    }

    pub fn modulus(&self) -> BigUint {
        &self.p * &self.q
    }

    pub fn p_prime(&self) -> BigUint {
        (&self.p - 1u32) >> 1
    }

    pub fn q_prime(&self) -> BigUint {
        (&self.q - 1u32) >> 1
    }

    /// `p'q'`, the order of the quadratic-residue subgroup.
    pub fn group_order(&self) -> BigUint {
        self.p_prime() * self.q_prime()
    }

    pub fn is_quadratic_residue(&self, x: &BigUint) -> bool {
        is_qr_mod_prime(x, &self.p) && is_qr_mod_prime(x, &self.q)
    }

    /// Checks the public key was derived from this secret key.
    pub fn matches(&self, pk: &IssuerPublicKey) -> Result<(), AbcError> {
        pk.check()?;
        if pk.n != self.modulus() {
            return Err(AbcError::KeyInvalid("modulus does not match p*q".into()));
        }
        let all_qr = [&pk.s, &pk.z]
            .into_iter()
            .chain(pk.r.iter())
            .all(|x| self.is_quadratic_residue(x));
        if !all_qr {
            return Err(AbcError::KeyInvalid("base is not a quadratic residue".into()));
        }
        Ok(())
    }
}

/// Generates an issuer key pair signing `attribute_count` attributes.
pub fn setup_issuer<R: RngCore + ?Sized>(
    issuer_id: &str,
    attribute_count: usize,
    modulus_bits: usize,
    rng: &mut R,
) -> Result<(IssuerPublicKey, IssuerSecretKey), AbcError> {
    let params = SystemParams::for_modulus(modulus_bits)?;
    let half = modulus_bits / 2;
    let (p, q) = loop {
        let (p, _) = gen_safe_prime(rng, half);
        let (q, _) = gen_safe_prime(rng, half);
        if p != q && (&p * &q).bits() as usize == modulus_bits {
            break (p, q);
        }
    };
    let sk = IssuerSecretKey { p, q };
    let pk = derive_public_key(issuer_id, attribute_count, params, &sk, rng)?;
    Ok((pk, sk))
}

/// Builds a key pair from caller-chosen safe primes. Used with toy primes
/// (`p = 23, q = 47`) to check the arithmetic by hand; the modulus size is
/// not checked against `params`.
pub fn setup_issuer_with_primes<R: RngCore + ?Sized>(
    issuer_id: &str,
    attribute_count: usize,
    params: SystemParams,
    p: BigUint,
    q: BigUint,
    rng: &mut R,
) -> Result<(IssuerPublicKey, IssuerSecretKey), AbcError> {
    let sk = IssuerSecretKey::from_primes(p, q)?;
    let pk = derive_public_key(issuer_id, attribute_count, params, &sk, rng)?;
    Ok((pk, sk))
}

fn derive_public_key<R: RngCore + ?Sized>(
    issuer_id: &str,
    attribute_count: usize,
    params: SystemParams,
    sk: &IssuerSecretKey,
    rng: &mut R,
) -> Result<IssuerPublicKey, AbcError> {
    params.validate()?;
    check_token(issuer_id).map_err(|e| AbcError::Parameter(e.to_string()))?;
    if attribute_count == 0 {
        return Err(AbcError::Parameter("attribute count must be at least 1".into()));
    }
    let n = sk.modulus();
    let order = sk.group_order();
    let two = BigUint::from(2u32);
    let upper = &n - 2u32;

    // S generates QR_n: a square whose order is neither 1, p' nor q'.
    let s = loop {
        let h = random_range(rng, &two, &upper);
        let s = h.modpow(&two, &n);
        let generator = s.gcd(&n).is_one()
            && (&s - 1u32).gcd(&n).is_one()
            && !s.modpow(&sk.p_prime(), &n).is_one()
            && !s.modpow(&sk.q_prime(), &n).is_one();
        if generator && s >= two && s <= upper {
            break s;
        }
    };
    let mut power_of_s = || loop {
        let x = random_range(rng, &two, &order);
        let y = s.modpow(&x, &n);
        if y >= two && y <= upper {
            break y;
        }
    };
    let z = power_of_s();
    let r = (0..=attribute_count).map(|_| power_of_s()).collect();
    Ok(IssuerPublicKey {
        n,
        s,
        z,
        r,
        params,
        issuer_id: issuer_id.to_owned(),
    })
}

/// The holder's secret key `k`, bound into every credential it receives.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolderSecret {
    #[serde(with = "hexint::uint")]
    pub(crate) k: BigUint,
}

impl std::fmt::Debug for HolderSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HolderSecret(..)")
    }
}

impl HolderSecret {
    pub fn from_value(k: BigUint) -> Self {
        HolderSecret { k }
    }

    pub fn value(&self) -> &BigUint {
        &self.k
    }
}

/// Uniform `k` in `[1, 2^message_bits)`.
pub fn holder_keygen<R: RngCore + ?Sized>(params: &SystemParams, rng: &mut R) -> HolderSecret {
    let upper = BigUint::one() << params.message_bits;
    HolderSecret {
        k: random_range(rng, &BigUint::one(), &upper),
    }
}
