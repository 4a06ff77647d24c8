//! Arbitrary-precision helpers: sampling, signed modular exponentiation and
//! prime generation.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::RngCore;

/// Uniform integer in `[0, 2^bits)`.
pub fn random_bits<R: RngCore + ?Sized>(rng: &mut R, bits: usize) -> BigUint {
    if bits == 0 {
        return BigUint::zero();
    }
    let nbytes = bits.div_ceil(8);
    let mut buf = vec![0u8; nbytes];
    rng.fill_bytes(&mut buf);
    let excess = nbytes * 8 - bits;
    buf[0] &= 0xffu8 >> excess;
    BigUint::from_bytes_be(&buf)
}

/// Uniform integer in the open interval `(-2^bits, 2^bits)`.
pub fn random_signed<R: RngCore + ?Sized>(rng: &mut R, bits: usize) -> BigInt {
    loop {
        // One extra bit selects the sign; the duplicate zero is rejected.
        let raw = random_bits(rng, bits + 1);
        let negative = raw.bit(bits as u64);
        let magnitude = raw & ((BigUint::one() << bits) - 1u32);
        if negative && magnitude.is_zero() {
            continue;
        }
        let sign = if negative { Sign::Minus } else { Sign::Plus };
        return BigInt::from_biguint(sign, magnitude);
    }
}

/// Uniform integer in `[low, high)`. Panics if the range is empty.
pub fn random_range<R: RngCore + ?Sized>(rng: &mut R, low: &BigUint, high: &BigUint) -> BigUint {
    assert!(low < high, "empty sampling range");
    let width = high - low;
    let bits = width.bits() as usize;
    loop {
        let candidate = random_bits(rng, bits);
        if candidate < width {
            return low + candidate;
        }
    }
}

/// Modular inverse of `a` modulo `modulus`, if it exists.
pub fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    if modulus.is_zero() {
        return None;
    }
    let m = BigInt::from(modulus.clone());
    let ext = BigInt::from(a % modulus).extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    ext.x.mod_floor(&m).to_biguint()
}

/// `base^exp mod modulus` for a signed exponent. Negative exponents go
/// through the modular inverse of `base`; `None` when it does not exist.
pub fn pow_signed(base: &BigUint, exp: &BigInt, modulus: &BigUint) -> Option<BigUint> {
    let magnitude = exp.magnitude();
    if exp.is_negative() {
        let inv = mod_inverse(base, modulus)?;
        Some(inv.modpow(magnitude, modulus))
    } else {
        Some(base.modpow(magnitude, modulus))
    }
}

/// Product of `bases[i]^exps[i] mod modulus`.
pub fn multi_pow(terms: &[(&BigUint, &BigInt)], modulus: &BigUint) -> Option<BigUint> {
    let mut acc = BigUint::one() % modulus;
    for (base, exp) in terms {
        acc = acc * pow_signed(base, exp, modulus)? % modulus;
    }
    Some(acc)
}

const SMALL_PRIMES: [u32; 167] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419, 421,
    431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541, 547,
    557, 563, 569, 571, 577, 587, 593, 599, 601, 607, 613, 617, 619, 631, 641, 643, 647, 653, 659,
    661, 673, 677, 683, 691, 701, 709, 719, 727, 733, 739, 743, 751, 757, 761, 769, 773, 787, 797,
    809, 811, 821, 823, 827, 829, 839, 853, 857, 859, 863, 877, 881, 883, 887, 907, 911, 919, 929,
    937, 941, 947, 953, 967, 971, 977, 983, 991, 997,
];

const MILLER_RABIN_ROUNDS: usize = 32;

fn small_residue(n: &BigUint, p: u32) -> u32 {
    (n % p).iter_u32_digits().next().unwrap_or(0)
}

/// Miller-Rabin probable-prime test with bases drawn from `rng`.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    if n == &two {
        return true;
    }
    if n.is_even() {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        if small_residue(n, p) == 0 {
            return n == &BigUint::from(p);
        }
    }
    miller_rabin(n, MILLER_RABIN_ROUNDS, rng)
}

fn miller_rabin<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let one = BigUint::one();
    let n_minus_one = n - 1u32;
    let shift = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> shift;
    let two = BigUint::from(2u32);
    // Base 2 first: cheap and rejects almost every composite.
    let bases = std::iter::once(two.clone()).chain(
        std::iter::repeat_with(|| random_range(rng, &two, &n_minus_one)).take(rounds - 1),
    );
    'bases: for a in bases {
        let a = a % n;
        if a.is_zero() {
            continue;
        }
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..shift {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'bases;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Random safe prime `p = 2p' + 1` of exactly `bits` bits with
/// `p ≡ 3 (mod 4)`. Returns `(p, p')`.
pub fn gen_safe_prime<R: RngCore + ?Sized>(rng: &mut R, bits: usize) -> (BigUint, BigUint) {
    assert!(bits >= 8, "safe primes below 8 bits are not supported");
    loop {
        // p' odd with its top bit set, so p = 2p'+1 has exactly `bits` bits
        // and p ≡ 3 (mod 4).
        let mut q = random_bits(rng, bits - 1);
        q.set_bit((bits - 2) as u64, true);
        q.set_bit(0, true);
        let mut residues: Vec<u32> = SMALL_PRIMES.iter().map(|&p| small_residue(&q, p)).collect();
        // Walk odd candidates q, q+2, ... sieving q and 2q+1 together.
        for _ in 0..(1 << 14) {
            if q.bits() as usize != bits - 1 {
                break;
            }
            let sieved = SMALL_PRIMES.iter().zip(&residues).all(|(&p, &r)| {
                r != 0 && r != (p - 1) / 2
            });
            if sieved {
                let p = (&q << 1) + 1u32;
                if miller_rabin(&q, 1, rng)
                    && miller_rabin(&p, 1, rng)
                    && miller_rabin(&q, MILLER_RABIN_ROUNDS, rng)
                    && miller_rabin(&p, MILLER_RABIN_ROUNDS, rng)
                {
                    return (p, q);
                }
            }
            q += 2u32;
            for (r, &p) in residues.iter_mut().zip(SMALL_PRIMES.iter()) {
                *r = (*r + 2) % p;
            }
        }
    }
}

/// Random prime in `[start, start + 2^width_bits]`.
pub fn gen_prime_in_interval<R: RngCore + ?Sized>(
    rng: &mut R,
    start: &BigUint,
    width_bits: usize,
) -> BigUint {
    let end = start + (BigUint::one() << width_bits);
    loop {
        let candidate = random_range(rng, start, &(&end + 1u32)) | BigUint::one();
        if candidate <= end && is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

/// `true` when `x` is a quadratic residue modulo the odd prime `p`.
pub fn is_qr_mod_prime(x: &BigUint, p: &BigUint) -> bool {
    let r = x % p;
    if r.is_zero() {
        return false;
    }
    let exp = (p - 1u32) >> 1;
    r.modpow(&exp, p).is_one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    #[test]
    fn primality_matches_trial_division() {
        let mut rng = rng();
        for n in 0u32..3000 {
            let trial = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_probable_prime(&BigUint::from(n), &mut rng), trial, "n = {n}");
        }
    }

    #[test]
    fn carmichael_numbers_rejected() {
        let mut rng = rng();
        for n in [561u32, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&BigUint::from(n), &mut rng));
        }
    }

    #[test]
    fn safe_prime_shape() {
        let mut rng = rng();
        let (p, q) = gen_safe_prime(&mut rng, 64);
        assert_eq!(p.bits(), 64);
        assert_eq!(p, &q * 2u32 + 1u32);
        assert_eq!(&p % 4u32, BigUint::from(3u32));
        assert!(is_probable_prime(&p, &mut rng));
        assert!(is_probable_prime(&q, &mut rng));
    }

    #[test]
    fn signed_pow_uses_inverse() {
        let n = BigUint::from(1081u32);
        let b = BigUint::from(5u32);
        let inv = pow_signed(&b, &BigInt::from(-3), &n).unwrap();
        let fwd = pow_signed(&b, &BigInt::from(3), &n).unwrap();
        assert_eq!((inv * fwd) % &n, BigUint::one());
        assert!(pow_signed(&BigUint::from(23u32), &BigInt::from(-1), &n).is_none());
    }

    #[test]
    fn random_signed_stays_in_range() {
        let mut rng = rng();
        let bound = BigInt::from(1u32) << 10;
        let mut saw_negative = false;
        for _ in 0..500 {
            let x = random_signed(&mut rng, 10);
            assert!(x.abs() < bound);
            saw_negative |= x.is_negative();
        }
        assert!(saw_negative);
    }

    #[test]
    fn prime_interval() {
        let mut rng = rng();
        let start = BigUint::one() << 100;
        let p = gen_prime_in_interval(&mut rng, &start, 30);
        assert!(p >= start && p <= &start + (BigUint::one() << 30));
        assert!(is_probable_prime(&p, &mut rng));
    }
}
