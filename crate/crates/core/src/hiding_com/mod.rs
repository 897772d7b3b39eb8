// SPDX-License-Identifier: Apache-2.0

//! Statistically hiding, computationally binding commitment to one message,
//! in the Halevi–Micali style.
//!
//! With `ℓ` the hash output length, the committer hashes the message to an
//! `ℓ`-bit value `μ`, draws a `4ℓ`-bit witness `x`, and publishes
//! `(H(x), a, b)` where `a` is uniform in GF(2^{4ℓ}) and `b` is uniform except
//! that its top `ℓ` bits are fixed so that `msb_ℓ(a·x ⊕ b) = μ`. The universal
//! hash `x ↦ msb_ℓ(a·x ⊕ b)` loses almost all information about `μ` because
//! `x` keeps roughly `3ℓ` bits of entropy given `H(x)`.

pub mod field;

use rand::RngCore;
use thiserror::Error;

use crate::encoding::{self, CanonicalValue, EncodingError, HashDescriptor, HashKey};
use field::BinaryField;

/// `x^16 + x^5 + x^3 + x + 1`
pub const FIELD_TOY: BinaryField = BinaryField::new(16, &[5, 3, 1, 0]);
/// `x^1024 + x^19 + x^6 + x + 1`
pub const FIELD_1024: BinaryField = BinaryField::new(1024, &[19, 6, 1, 0]);
/// `x^2048 + x^19 + x^14 + x^13 + 1`
pub const FIELD_2048: BinaryField = BinaryField::new(2048, &[19, 14, 13, 0]);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HidingError {
    #[error("unknown hiding commitment descriptor `{0}`")]
    UnknownDescriptor(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HidingDescriptor {
    /// ℓ = 256 over SHA-256, witness and field elements of 1024 bits.
    Hm256,
    /// ℓ = 512 over SHA-512, 2048-bit field.
    Hm512,
    /// ℓ = 4 with an 8-bit hash and a 16-bit field, for distance experiments.
    Toy,
}

impl HidingDescriptor {
    pub fn from_name(name: &str) -> Result<Self, HidingError> {
        match name {
            "hm256" => Ok(HidingDescriptor::Hm256),
            "hm512" => Ok(HidingDescriptor::Hm512),
            "hm-toy" => Ok(HidingDescriptor::Toy),
            other => Err(HidingError::UnknownDescriptor(other.to_owned())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HidingDescriptor::Hm256 => "hm256",
            HidingDescriptor::Hm512 => "hm512",
            HidingDescriptor::Toy => "hm-toy",
        }
    }

    pub fn hash(self) -> HashDescriptor {
        match self {
            HidingDescriptor::Hm256 => HashDescriptor::Sha256,
            HidingDescriptor::Hm512 => HashDescriptor::Sha512,
            HidingDescriptor::Toy => HashDescriptor::Toy8,
        }
    }

    /// Bits of the message digest that get committed.
    pub fn ell(self) -> usize {
        match self {
            HidingDescriptor::Hm256 => 256,
            HidingDescriptor::Hm512 => 512,
            HidingDescriptor::Toy => 4,
        }
    }

    pub fn field(self) -> &'static BinaryField {
        match self {
            HidingDescriptor::Hm256 => &FIELD_1024,
            HidingDescriptor::Hm512 => &FIELD_2048,
            HidingDescriptor::Toy => &FIELD_TOY,
        }
    }
}

/// Public commitment key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HidingParams {
    pub descriptor: HidingDescriptor,
    pub key: HashKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HidingCommitment {
    pub y: Vec<u8>,
    pub a: Vec<u8>,
    pub b: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HidingDecommitment {
    pub x: Vec<u8>,
}

impl HidingCommitment {
    /// `Tuple[ByteString(y), ByteString(a), ByteString(b)]`
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::tuple([
            CanonicalValue::bytes(self.y.clone()),
            CanonicalValue::bytes(self.a.clone()),
            CanonicalValue::bytes(self.b.clone()),
        ])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple_of(3)?;
        Ok(HidingCommitment {
            y: items[0].as_bytes()?.to_vec(),
            a: items[1].as_bytes()?.to_vec(),
            b: items[2].as_bytes()?.to_vec(),
        })
    }
}

impl HidingDecommitment {
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::bytes(self.x.clone())
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        Ok(HidingDecommitment {
            x: v.as_bytes()?.to_vec(),
        })
    }
}

impl HidingParams {
    pub fn setup<R: RngCore + ?Sized>(name: &str, rng: &mut R) -> Result<Self, HidingError> {
        let descriptor = HidingDescriptor::from_name(name)?;
        Ok(HidingParams {
            descriptor,
            key: encoding::keygen(descriptor.hash(), rng),
        })
    }

    pub fn witness_bytes(&self) -> usize {
        self.descriptor.field().byte_len()
    }

    /// `Tuple[ByteString(descriptor), key]`
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::tuple([CanonicalValue::str(self.descriptor.name()), self.key.to_value()])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, HidingError> {
        let items = v.as_tuple_of(2)?;
        let descriptor = HidingDescriptor::from_name(items[0].as_str()?)?;
        let key = HashKey::from_value(&items[1])?;
        if key.descriptor() != descriptor.hash() {
            return Err(EncodingError::Shape("key matching the hiding descriptor").into());
        }
        Ok(HidingParams { descriptor, key })
    }

    /// The ℓ-bit digest of the message, left-aligned in `ceil(ℓ/8)` bytes.
    fn message_digest(&self, m: &CanonicalValue) -> Result<Vec<u8>, EncodingError> {
        let d = encoding::hash(&self.key, m)?;
        Ok(msb_bits(&d.0, self.descriptor.ell()))
    }

    fn witness_hash(&self, x: &[u8]) -> Vec<u8> {
        encoding::hash_encoded(&self.key, &witness_encoding(x)).0
    }

    /// Top ℓ bits of `a·x ⊕ b`, left-aligned.
    fn universal_hash(&self, a: &[u8], x: &[u8], b: &[u8]) -> Option<Vec<u8>> {
        let f = self.descriptor.field();
        let prod = f.mul(&f.from_be_bytes(a)?, &f.from_be_bytes(x)?);
        let mut out = f.to_be_bytes(&prod);
        if b.len() != out.len() {
            return None;
        }
        out.iter_mut().zip(b).for_each(|(o, bb)| *o ^= bb);
        Some(msb_bits(&out, self.descriptor.ell()))
    }

    pub fn commit<R: RngCore + ?Sized>(
        &self,
        m: &CanonicalValue,
        rng: &mut R,
    ) -> Result<(HidingCommitment, HidingDecommitment), EncodingError> {
        let mu = self.message_digest(m)?;
        let n = self.witness_bytes();
        let mut x = vec![0u8; n];
        let mut a = vec![0u8; n];
        let mut b = vec![0u8; n];
        rng.fill_bytes(&mut x);
        rng.fill_bytes(&mut a);
        rng.fill_bytes(&mut b);
        let ell = self.descriptor.ell();
        let zero = vec![0u8; n];
        let ax = self
            .universal_hash(&a, &x, &zero)
            .expect("lengths fixed by params");
        // top ℓ bits of b := msb(a·x) ⊕ μ, low 3ℓ bits stay uniform
        let want: Vec<u8> = ax.iter().zip(&mu).map(|(p, q)| p ^ q).collect();
        set_msb_bits(&mut b, &want, ell);
        let y = self.witness_hash(&x);
        Ok((HidingCommitment { y, a, b }, HidingDecommitment { x }))
    }

    pub fn verify(&self, m: &CanonicalValue, c: &HidingCommitment, d: &HidingDecommitment) -> bool {
        let n = self.witness_bytes();
        if d.x.len() != n || c.a.len() != n || c.b.len() != n {
            return false;
        }
        if self.witness_hash(&d.x) != c.y {
            return false;
        }
        let Ok(mu) = self.message_digest(m) else {
            return false;
        };
        self.universal_hash(&c.a, &d.x, &c.b).as_deref() == Some(&mu[..])
    }
}

fn witness_encoding(x: &[u8]) -> Vec<u8> {
    CanonicalValue::bytes(x.to_vec())
        .encode()
        .expect("witness is small")
}

/// First `bits` bits of `bytes`, left-aligned, trailing bits of the last byte
/// zeroed.
fn msb_bits(bytes: &[u8], bits: usize) -> Vec<u8> {
    let mut out = bytes[..bits.div_ceil(8)].to_vec();
    if bits % 8 != 0 {
        let last = out.len() - 1;
        out[last] &= 0xffu8 << (8 - bits % 8);
    }
    out
}

fn set_msb_bits(target: &mut [u8], value: &[u8], bits: usize) {
    let full = bits / 8;
    target[..full].copy_from_slice(&value[..full]);
    if bits % 8 != 0 {
        let mask = 0xffu8 << (8 - bits % 8);
        target[full] = (target[full] & !mask) | (value[full] & mask);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn params(name: &str) -> (HidingParams, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        (HidingParams::setup(name, &mut rng).unwrap(), rng)
    }

    #[test]
    fn setup_sizes() {
        let (p, _) = params("hm256");
        assert_eq!(p.descriptor.ell(), 256);
        assert_eq!(p.descriptor.field().degree(), 1024);
        let (p, _) = params("hm512");
        assert_eq!(p.descriptor.ell(), 512);
        assert_eq!(p.descriptor.field().degree(), 2048);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            HidingParams::setup("pedersen", &mut rng),
            Err(HidingError::UnknownDescriptor(_))
        ));
    }

    #[test]
    fn moduli_are_irreducible() {
        assert!(field::poly::is_irreducible(&FIELD_TOY));
        assert!(field::poly::is_irreducible(&FIELD_1024));
        assert!(field::poly::is_irreducible(&FIELD_2048));
    }

    #[test]
    fn correctness_and_message_binding() {
        for name in ["hm256", "hm512", "hm-toy"] {
            let (p, mut rng) = params(name);
            for i in 0..20u64 {
                let m = CanonicalValue::tuple([CanonicalValue::UInt(i), CanonicalValue::str(name)]);
                let (c, d) = p.commit(&m, &mut rng).unwrap();
                assert!(p.verify(&m, &c, &d));
                if name != "hm-toy" {
                    let other = CanonicalValue::tuple([CanonicalValue::UInt(i + 1), CanonicalValue::str(name)]);
                    assert!(!p.verify(&other, &c, &d));
                }
            }
        }
    }

    #[test]
    fn bit_flips_are_rejected() {
        let (p, mut rng) = params("hm256");
        let m = CanonicalValue::str("record");
        let (c, d) = p.commit(&m, &mut rng).unwrap();
        for i in 0..d.x.len() {
            let mut bad = d.clone();
            bad.x[i] ^= 1;
            assert!(!p.verify(&m, &c, &bad));
        }
        // a and b only influence the top ℓ bits of a·x ⊕ b through the product;
        // flipping any byte of `a` or the top ℓ bits of `b` must be caught
        for i in 0..c.a.len() {
            let mut bad = c.clone();
            bad.a[i] ^= 0x80;
            assert!(!p.verify(&m, &bad, &d), "a byte {i}");
        }
        for i in 0..32 {
            let mut bad = c.clone();
            bad.b[i] ^= 1;
            assert!(!p.verify(&m, &bad, &d));
        }
        let mut bad = c.clone();
        bad.y[0] ^= 1;
        assert!(!p.verify(&m, &bad, &d));
        let mut short = d.clone();
        short.x.pop();
        assert!(!p.verify(&m, &c, &short));
    }

    #[test]
    fn value_roundtrip() {
        let (p, mut rng) = params("hm-toy");
        let (c, d) = p.commit(&CanonicalValue::Bottom, &mut rng).unwrap();
        assert_eq!(HidingCommitment::from_value(&c.to_value()).unwrap(), c);
        assert_eq!(HidingDecommitment::from_value(&d.to_value()).unwrap(), d);
        assert_eq!(HidingParams::from_value(&p.to_value()).unwrap(), p);
    }
}
