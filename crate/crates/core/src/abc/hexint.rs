//! `0x`-prefixed lowercase hex encoding for big integers in JSON messages.

use num_bigint::{BigInt, BigUint, Sign};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub fn encode_uint(x: &BigUint) -> String {
    format!("0x{}", x.to_str_radix(16))
}

pub fn encode_int(x: &BigInt) -> String {
    match x.sign() {
        Sign::Minus => format!("-0x{}", x.magnitude().to_str_radix(16)),
        _ => encode_uint(x.magnitude()),
    }
}

pub fn decode_uint(s: &str) -> Result<BigUint, String> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("integer {s:?} lacks the 0x prefix"))?;
    let valid = !digits.is_empty()
        && digits.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        && (digits == "0" || !digits.starts_with('0'));
    if !valid {
        return Err(format!("integer {s:?} is not minimal lowercase hex"));
    }
    BigUint::parse_bytes(digits.as_bytes(), 16).ok_or_else(|| format!("bad hex integer {s:?}"))
}

pub fn decode_int(s: &str) -> Result<BigInt, String> {
    match s.strip_prefix('-') {
        Some(rest) => {
            let m = decode_uint(rest)?;
            if m == BigUint::default() {
                return Err("negative zero".into());
            }
            Ok(BigInt::from_biguint(Sign::Minus, m))
        }
        None => Ok(BigInt::from(decode_uint(s)?)),
    }
}

pub mod uint {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_uint(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        decode_uint(&s).map_err(D::Error::custom)
    }
}

pub mod int {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_int(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        decode_int(&s).map_err(D::Error::custom)
    }
}

pub mod uint_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&encode_uint(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| decode_uint(s).map_err(D::Error::custom))
            .collect()
    }
}
