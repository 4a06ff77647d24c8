use serde::{Deserialize, Serialize};

use super::AbcError;

/// Modulus sizes accepted by [`super::setup_issuer`].
pub const SUPPORTED_MODULUS_BITS: [usize; 3] = [512, 1024, 2048];

/// Bit lengths of the scheme's integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    /// RSA modulus size.
    pub modulus_bits: usize,
    /// Attribute and holder-secret size.
    pub message_bits: usize,
    /// Size of the prime exponent `e`.
    pub e_bits: usize,
    /// Width of the interval `e` is drawn from.
    pub e_interval_bits: usize,
    /// Size of the signature blinding `v`.
    pub v_bits: usize,
    /// Statistical zero-knowledge slack.
    pub stat_bits: usize,
    /// Fiat-Shamir challenge size.
    pub hash_bits: usize,
}

impl SystemParams {
    /// Parameters for a supported modulus size. `v_bits` scales with the
    /// modulus so `v_bits - modulus_bits` stays at the 2048-bit profile's 676.
    ///
    /// 512 is a test profile and offers no security.
    pub fn for_modulus(modulus_bits: usize) -> Result<Self, AbcError> {
        if !SUPPORTED_MODULUS_BITS.contains(&modulus_bits) {
            return Err(AbcError::Parameter(format!(
                "unsupported modulus size {modulus_bits}; expected one of {SUPPORTED_MODULUS_BITS:?}"
            )));
        }
        let params = SystemParams {
            modulus_bits,
            message_bits: 256,
            e_bits: 597,
            e_interval_bits: 120,
            v_bits: modulus_bits + 676,
            stat_bits: 80,
            hash_bits: 256,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn test_profile() -> Self {
        Self::for_modulus(512).expect("512 is supported")
    }

    pub fn validate(&self) -> Result<(), AbcError> {
        let fail = |what: &str| Err(AbcError::Parameter(what.to_owned()));
        if self.e_bits <= self.message_bits + 2 {
            return fail("e_bits must exceed message_bits + 2");
        }
        if self.v_bits < self.modulus_bits + self.message_bits + 2 * self.stat_bits {
            return fail("v_bits must be at least modulus_bits + message_bits + 2*stat_bits");
        }
        if self.e_interval_bits + 1 >= self.e_bits {
            return fail("e_interval_bits must be below e_bits - 1");
        }
        if self.hash_bits != 256 {
            return fail("hash_bits must be 256 (SHA-256 challenges)");
        }
        if self.message_bits < 2 {
            return fail("message_bits too small");
        }
        Ok(())
    }

    /// Bound on |v - e*r| for the randomized signature blinding.
    pub(crate) fn v_bar_bits(&self) -> usize {
        self.v_bits.max(self.e_bits + self.modulus_bits + self.stat_bits) + 1
    }

    /// Randomizer width for a secret of `secret_bits` bits.
    pub(crate) fn mask_bits(&self, secret_bits: usize) -> usize {
        secret_bits + self.stat_bits + self.hash_bits
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::for_modulus(2048).expect("2048 is supported")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_values() {
        let p = SystemParams::default();
        assert_eq!(
            (p.modulus_bits, p.message_bits, p.e_bits, p.e_interval_bits, p.v_bits, p.stat_bits, p.hash_bits),
            (2048, 256, 597, 120, 2724, 80, 256)
        );
    }

    #[test]
    fn unsupported_modulus() {
        assert!(matches!(SystemParams::for_modulus(768), Err(AbcError::Parameter(_))));
    }

    #[test]
    fn all_profiles_valid() {
        for bits in SUPPORTED_MODULUS_BITS {
            SystemParams::for_modulus(bits).unwrap().validate().unwrap();
        }
    }
}
