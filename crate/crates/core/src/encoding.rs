// SPDX-License-Identifier: Apache-2.0

//! Canonical serialization of every value that gets hashed, signed or
//! committed, the keyed hash built on top of it, and the logical clock.
//!
//! Wire format of a [`CanonicalValue`]: one tag byte, a 4-byte big-endian
//! payload length, then the payload.
//!
//! | tag  | variant    | payload                              |
//! |------|------------|--------------------------------------|
//! | 0x00 | ByteString | raw bytes                            |
//! | 0x01 | Tuple      | concatenated encodings of the items  |
//! | 0x02 | UInt       | 8-byte big-endian integer            |
//! | 0x03 | Bottom     | empty                                |

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::RngCore;
use sha2::{Digest as _, Sha256, Sha512};
use thiserror::Error;

/// Abstract integer time. The simulator owns the clock; nothing here reads
/// wall-clock time.
pub type Time = u64;

const TAG_BYTES: u8 = 0x00;
const TAG_TUPLE: u8 = 0x01;
const TAG_UINT: u8 = 0x02;
const TAG_BOTTOM: u8 = 0x03;
const HEADER_LEN: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("payload of {0} bytes does not fit a 32-bit length prefix")]
    Overflow(usize),
    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("unknown tag byte {0:#04x}")]
    UnknownTag(u8),
    #[error("malformed {kind} payload of length {len}")]
    BadLength { kind: &'static str, len: usize },
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("unknown hash descriptor `{0}`")]
    UnknownDescriptor(String),
    #[error("hash key for {descriptor} must be {expected} bytes, got {actual}")]
    KeyLength {
        descriptor: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("expected {0}")]
    Shape(&'static str),
    #[error("invalid hex: {0}")]
    Hex(String),
}

pub type Result<T, E = EncodingError> = std::result::Result<T, E>;

/// A value in the canonical data model.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum CanonicalValue {
    ByteString(Vec<u8>),
    UInt(u64),
    /// The padding placeholder.
    Bottom,
    Tuple(Vec<CanonicalValue>),
}

impl fmt::Debug for CanonicalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CanonicalValue::ByteString(b) if b.len() <= 32 => write!(f, "b\"{}\"", hex::encode(b)),
            CanonicalValue::ByteString(b) => {
                write!(f, "b\"{}..\"({} bytes)", hex::encode(&b[..16]), b.len())
            }
            CanonicalValue::UInt(v) => write!(f, "{v}"),
            CanonicalValue::Bottom => f.write_str("⊥"),
            CanonicalValue::Tuple(items) => f.debug_list().entries(items).finish(),
        }
    }
}

impl CanonicalValue {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        CanonicalValue::ByteString(b.into())
    }

    pub fn str(s: &str) -> Self {
        CanonicalValue::ByteString(s.as_bytes().to_vec())
    }

    pub fn tuple(items: impl IntoIterator<Item = CanonicalValue>) -> Self {
        CanonicalValue::Tuple(items.into_iter().collect())
    }

    /// Length of [`encode`](Self::encode)'s output, without producing it.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload_len()
    }

    fn payload_len(&self) -> usize {
        match self {
            CanonicalValue::ByteString(b) => b.len(),
            CanonicalValue::UInt(_) => 8,
            CanonicalValue::Bottom => 0,
            CanonicalValue::Tuple(items) => items.iter().map(Self::encoded_len).sum(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<()> {
        let len = self.payload_len();
        let len32 = u32::try_from(len).map_err(|_| EncodingError::Overflow(len))?;
        let tag = match self {
            CanonicalValue::ByteString(_) => TAG_BYTES,
            CanonicalValue::Tuple(_) => TAG_TUPLE,
            CanonicalValue::UInt(_) => TAG_UINT,
            CanonicalValue::Bottom => TAG_BOTTOM,
        };
        out.push(tag);
        out.extend_from_slice(&len32.to_be_bytes());
        match self {
            CanonicalValue::ByteString(b) => out.extend_from_slice(b),
            CanonicalValue::UInt(v) => out.extend_from_slice(&v.to_be_bytes()),
            CanonicalValue::Bottom => {}
            CanonicalValue::Tuple(items) => {
                for item in items {
                    item.encode_into(out)?;
                }
            }
        }
        Ok(())
    }

    /// Strict inverse of [`encode`](Self::encode): rejects trailing bytes,
    /// unknown tags and non-canonical lengths.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (value, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(EncodingError::TrailingBytes(bytes.len() - used));
        }
        Ok(value)
    }

    fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_LEN {
            return Err(EncodingError::Truncated {
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        let tag = bytes[0];
        let len = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]) as usize;
        let end = HEADER_LEN + len;
        if bytes.len() < end {
            return Err(EncodingError::Truncated {
                needed: end,
                available: bytes.len(),
            });
        }
        let payload = &bytes[HEADER_LEN..end];
        let value = match tag {
            TAG_BYTES => CanonicalValue::ByteString(payload.to_vec()),
            TAG_UINT => {
                let arr: [u8; 8] = payload
                    .try_into()
                    .map_err(|_| EncodingError::BadLength { kind: "uint", len })?;
                CanonicalValue::UInt(u64::from_be_bytes(arr))
            }
            TAG_BOTTOM => {
                if len != 0 {
                    return Err(EncodingError::BadLength { kind: "bottom", len });
                }
                CanonicalValue::Bottom
            }
            TAG_TUPLE => {
                let mut items = Vec::new();
                let mut rest = payload;
                while !rest.is_empty() {
                    let (item, used) = Self::decode_prefix(rest)?;
                    items.push(item);
                    rest = &rest[used..];
                }
                CanonicalValue::Tuple(items)
            }
            other => return Err(EncodingError::UnknownTag(other)),
        };
        Ok((value, end))
    }

    pub fn as_bytes(&self) -> Result<&[u8]> {
        match self {
            CanonicalValue::ByteString(b) => Ok(b),
            _ => Err(EncodingError::Shape("byte string")),
        }
    }

    pub fn as_uint(&self) -> Result<u64> {
        match self {
            CanonicalValue::UInt(v) => Ok(*v),
            _ => Err(EncodingError::Shape("unsigned integer")),
        }
    }

    pub fn as_tuple(&self) -> Result<&[CanonicalValue]> {
        match self {
            CanonicalValue::Tuple(items) => Ok(items),
            _ => Err(EncodingError::Shape("tuple")),
        }
    }

    /// Tuple with exactly `n` items.
    pub fn as_tuple_of(&self, n: usize) -> Result<&[CanonicalValue]> {
        let items = self.as_tuple()?;
        if items.len() != n {
            return Err(EncodingError::Shape("tuple of the expected arity"));
        }
        Ok(items)
    }

    pub fn as_str(&self) -> Result<&str> {
        std::str::from_utf8(self.as_bytes()?).map_err(|_| EncodingError::Shape("utf-8 string"))
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, CanonicalValue::Bottom)
    }
}

impl From<u64> for CanonicalValue {
    fn from(v: u64) -> Self {
        CanonicalValue::UInt(v)
    }
}

impl From<&[u8]> for CanonicalValue {
    fn from(b: &[u8]) -> Self {
        CanonicalValue::ByteString(b.to_vec())
    }
}

impl From<Vec<u8>> for CanonicalValue {
    fn from(b: Vec<u8>) -> Self {
        CanonicalValue::ByteString(b)
    }
}

/// Supported keyed hash functions. Keying is prefix concatenation:
/// `H(k, v) = SHA(k ‖ encode(v))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum HashDescriptor {
    #[serde(rename = "sha256")]
    Sha256,
    #[serde(rename = "sha512")]
    Sha512,
    /// SHA-256 truncated to one byte. Only meant for exhaustive and
    /// Monte-Carlo experiments at toy sizes.
    #[serde(rename = "toy8")]
    Toy8,
}

impl HashDescriptor {
    pub fn name(self) -> &'static str {
        match self {
            HashDescriptor::Sha256 => "sha256",
            HashDescriptor::Sha512 => "sha512",
            HashDescriptor::Toy8 => "toy8",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sha256" => Ok(HashDescriptor::Sha256),
            "sha512" => Ok(HashDescriptor::Sha512),
            "toy8" => Ok(HashDescriptor::Toy8),
            other => Err(EncodingError::UnknownDescriptor(other.to_owned())),
        }
    }

    pub fn key_len(self) -> usize {
        match self {
            HashDescriptor::Sha256 => 32,
            HashDescriptor::Sha512 => 64,
            HashDescriptor::Toy8 => 4,
        }
    }

    pub fn output_len(self) -> usize {
        match self {
            HashDescriptor::Sha256 => 32,
            HashDescriptor::Sha512 => 64,
            HashDescriptor::Toy8 => 1,
        }
    }

    /// Unkeyed digest of raw bytes.
    pub fn digest_raw(self, parts: &[&[u8]]) -> Vec<u8> {
        match self {
            HashDescriptor::Sha256 | HashDescriptor::Toy8 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                let mut out = h.finalize().to_vec();
                out.truncate(self.output_len());
                out
            }
            HashDescriptor::Sha512 => {
                let mut h = Sha512::new();
                for p in parts {
                    h.update(p);
                }
                h.finalize().to_vec()
            }
        }
    }
}

impl fmt::Display for HashDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HashKey {
    descriptor: HashDescriptor,
    key: Vec<u8>,
}

impl fmt::Debug for HashKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashKey({}, {})", self.descriptor, hex::encode(&self.key))
    }
}

impl HashKey {
    pub fn from_bytes(descriptor: HashDescriptor, key: impl Into<Vec<u8>>) -> Result<Self> {
        let key = key.into();
        if key.len() != descriptor.key_len() {
            return Err(EncodingError::KeyLength {
                descriptor: descriptor.name(),
                expected: descriptor.key_len(),
                actual: key.len(),
            });
        }
        Ok(HashKey { descriptor, key })
    }

    pub fn descriptor(&self) -> HashDescriptor {
        self.descriptor
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.key
    }

    /// `Tuple[ByteString(descriptor), ByteString(key)]`
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::tuple([
            CanonicalValue::str(self.descriptor.name()),
            CanonicalValue::bytes(self.key.clone()),
        ])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self> {
        let items = v.as_tuple_of(2)?;
        let desc = HashDescriptor::from_name(items[0].as_str()?)?;
        HashKey::from_bytes(desc, items[1].as_bytes()?)
    }
}

/// Draw a uniformly random key for `descriptor`.
pub fn keygen<R: RngCore + ?Sized>(descriptor: HashDescriptor, rng: &mut R) -> HashKey {
    let mut key = vec![0u8; descriptor.key_len()];
    rng.fill_bytes(&mut key);
    HashKey { descriptor, key }
}

/// Like [`keygen`], but by descriptor name.
pub fn keygen_named<R: RngCore + ?Sized>(name: &str, rng: &mut R) -> Result<HashKey> {
    Ok(keygen(HashDescriptor::from_name(name)?, rng))
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub Vec<u8>);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", hex::encode(&self.0))
    }
}

impl Digest {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::bytes(self.0.clone())
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self> {
        Ok(Digest(v.as_bytes()?.to_vec()))
    }
}

/// Keyed hash of a canonical value.
pub fn hash(key: &HashKey, value: &CanonicalValue) -> Result<Digest> {
    let encoded = value.encode()?;
    Ok(hash_encoded(key, &encoded))
}

/// Keyed hash over an already-encoded value.
pub fn hash_encoded(key: &HashKey, encoded: &[u8]) -> Digest {
    Digest(key.descriptor.digest_raw(&[&key.key, encoded]))
}

/// One line of a hash test-vector file: `hex(key) hex(encode(v)) hex(digest)`.
/// The descriptor is implied by the key length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub key: HashKey,
    pub encoded: Vec<u8>,
    pub digest: Digest,
}

impl TestVector {
    pub fn compute(key: &HashKey, value: &CanonicalValue) -> Result<Self> {
        let encoded = value.encode()?;
        let digest = hash_encoded(key, &encoded);
        Ok(TestVector {
            key: key.clone(),
            encoded,
            digest,
        })
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let mut fields = line.split_whitespace();
        let mut next_hex = || -> Result<Vec<u8>> {
            let field = fields
                .next()
                .ok_or(EncodingError::Shape("three hex fields"))?;
            hex::decode(field).map_err(|e| EncodingError::Hex(e.to_string()))
        };
        let key = next_hex()?;
        let encoded = next_hex()?;
        let digest = next_hex()?;
        let descriptor = [HashDescriptor::Sha256, HashDescriptor::Sha512, HashDescriptor::Toy8]
            .into_iter()
            .find(|d| d.key_len() == key.len())
            .ok_or(EncodingError::Shape("key length of a known descriptor"))?;
        Ok(TestVector {
            key: HashKey::from_bytes(descriptor, key)?,
            encoded,
            digest: Digest(digest),
        })
    }

    pub fn to_line(&self) -> String {
        format!(
            "{} {} {}",
            hex::encode(self.key.as_bytes()),
            hex::encode(&self.encoded),
            hex::encode(&self.digest.0)
        )
    }

    /// Decode, re-encode and re-hash; true iff everything matches bit for bit.
    pub fn check(&self) -> bool {
        let Ok(value) = CanonicalValue::decode(&self.encoded) else {
            return false;
        };
        match hash(&self.key, &value) {
            Ok(d) => value.encode().ok().as_deref() == Some(&self.encoded[..]) && d == self.digest,
            Err(_) => false,
        }
    }
}

/// Shared monotone time register. Clones observe the same time.
#[derive(Debug, Clone, Default)]
pub struct LogicalClock {
    now: Arc<AtomicU64>,
}

impl LogicalClock {
    pub fn new(start: Time) -> Self {
        LogicalClock {
            now: Arc::new(AtomicU64::new(start)),
        }
    }

    pub fn now(&self) -> Time {
        self.now.load(Ordering::SeqCst)
    }

    /// Move the clock to `t`; earlier times are ignored. Returns the time
    /// after the call.
    pub fn advance_to(&self, t: Time) -> Time {
        let prev = self.now.fetch_max(t, Ordering::SeqCst);
        prev.max(t)
    }

    pub fn advance_by(&self, dt: Time) -> Time {
        self.now.fetch_add(dt, Ordering::SeqCst) + dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn bottom_and_zero_encodings() {
        assert_eq!(CanonicalValue::Bottom.encode().unwrap(), [0x03, 0, 0, 0, 0]);
        assert_eq!(
            CanonicalValue::UInt(0).encode().unwrap(),
            [0x02, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn tuple_length_sums_children() {
        let v = CanonicalValue::tuple([CanonicalValue::str("ab"), CanonicalValue::UInt(1)]);
        // children: 5 + 2 and 5 + 8
        let mut expected = vec![0x01, 0, 0, 0, 20];
        expected.extend_from_slice(&[0x00, 0, 0, 0, 2, b'a', b'b']);
        expected.extend_from_slice(&[0x02, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(v.encode().unwrap(), expected);
        assert_eq!(v.encoded_len(), expected.len());
    }

    #[test]
    fn decode_rejects_noncanonical() {
        assert!(matches!(
            CanonicalValue::decode(&[0x03, 0, 0, 0, 1, 0]),
            Err(EncodingError::BadLength { .. })
        ));
        assert!(matches!(
            CanonicalValue::decode(&[0x02, 0, 0, 0, 4, 0, 0, 0, 0]),
            Err(EncodingError::BadLength { .. })
        ));
        assert!(matches!(
            CanonicalValue::decode(&[0x07, 0, 0, 0, 0]),
            Err(EncodingError::UnknownTag(7))
        ));
        assert!(matches!(
            CanonicalValue::decode(&[0x03, 0, 0, 0, 0, 0]),
            Err(EncodingError::TrailingBytes(1))
        ));
        assert!(matches!(
            CanonicalValue::decode(&[0x00, 0, 0, 0, 9, 1]),
            Err(EncodingError::Truncated { .. })
        ));
        // tuple whose declared length cuts a child in half
        assert!(CanonicalValue::decode(&[0x01, 0, 0, 0, 3, 0x03, 0, 0]).is_err());
    }

    #[test]
    fn hash_is_deterministic_and_keyed() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k1 = keygen(HashDescriptor::Sha256, &mut rng);
        let k2 = keygen(HashDescriptor::Sha256, &mut rng);
        let v = CanonicalValue::str("hello");
        assert_eq!(hash(&k1, &v).unwrap(), hash(&k1, &v).unwrap());
        assert_ne!(hash(&k1, &v).unwrap(), hash(&k2, &v).unwrap());
        assert_ne!(
            hash(&k1, &v).unwrap(),
            hash(&k1, &CanonicalValue::str("hellp")).unwrap()
        );
        assert_eq!(hash(&k1, &v).unwrap().0.len(), 32);
    }

    #[test]
    fn keygen_lengths_and_unknown() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert_eq!(keygen_named("sha256", &mut rng).unwrap().as_bytes().len(), 32);
        assert_eq!(keygen_named("sha512", &mut rng).unwrap().as_bytes().len(), 64);
        let a = keygen_named("sha256", &mut rng).unwrap();
        let b = keygen_named("sha256", &mut rng).unwrap();
        assert_ne!(a, b);
        assert!(matches!(
            keygen_named("md5", &mut rng),
            Err(EncodingError::UnknownDescriptor(_))
        ));
        assert!(matches!(
            HashKey::from_bytes(HashDescriptor::Sha512, vec![0; 32]),
            Err(EncodingError::KeyLength { .. })
        ));
    }

    #[test]
    fn clock_ignores_earlier_times() {
        let clock = LogicalClock::new(5);
        let other = clock.clone();
        assert_eq!(clock.advance_to(3), 5);
        assert_eq!(other.advance_to(9), 9);
        assert_eq!(clock.now(), 9);
        assert_eq!(clock.advance_by(2), 11);
    }

    pub(crate) fn arb_value() -> impl Strategy<Value = CanonicalValue> {
        let leaf = prop_oneof![
            proptest::collection::vec(any::<u8>(), 0..24).prop_map(CanonicalValue::ByteString),
            any::<u64>().prop_map(CanonicalValue::UInt),
            Just(CanonicalValue::Bottom),
        ];
        leaf.prop_recursive(6, 64, 5, |inner| {
            proptest::collection::vec(inner, 0..5).prop_map(CanonicalValue::Tuple)
        })
    }

    proptest! {
        #[test]
        fn roundtrip(v in arb_value()) {
            let enc = v.encode().unwrap();
            prop_assert_eq!(enc.len(), v.encoded_len());
            prop_assert_eq!(CanonicalValue::decode(&enc).unwrap(), v);
        }

        #[test]
        fn injective(a in arb_value(), b in arb_value()) {
            prop_assume!(a != b);
            prop_assert_ne!(a.encode().unwrap(), b.encode().unwrap());
        }

        #[test]
        fn clock_monotone(steps in proptest::collection::vec(any::<u16>(), 1..50)) {
            let clock = LogicalClock::new(0);
            let mut last = 0;
            for s in steps {
                clock.advance_to(s as Time);
                prop_assert!(clock.now() >= last);
                last = clock.now();
            }
        }
    }
}
