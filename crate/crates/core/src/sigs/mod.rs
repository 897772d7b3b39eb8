// SPDX-License-Identifier: Apache-2.0

//! Signature schemes and the registry of scheme instances.
//!
//! Two algorithms are available so that scheme rotation can be exercised:
//! Ed25519 (`ed25519`) and an in-repo Merkle few-time scheme
//! (`mss-<hash>-h<height>`, see [`mss`]).

pub mod mss;
pub mod pki;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{CanonicalValue, EncodingError, HashDescriptor, HashKey};
use crate::par::Exec;
use mss::{MssDescriptor, MssPublicKey, MssSecretKey, MssSignature};

pub use pki::{PkiRegistry, SchemeInstance, SchemeKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SigError {
    #[error("unknown signature descriptor `{0}`")]
    UnknownDescriptor(String),
    #[error("signing key `{0}` has no one-time keys left")]
    KeyExhausted(String),
    #[error("malformed key material: {0}")]
    MalformedKey(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigAlgorithm {
    Ed25519,
    Mss(MssDescriptor),
}

impl SigAlgorithm {
    pub fn parse(descriptor: &str) -> Result<Self, SigError> {
        if descriptor == "ed25519" {
            return Ok(SigAlgorithm::Ed25519);
        }
        MssDescriptor::parse(descriptor)
            .map(SigAlgorithm::Mss)
            .ok_or_else(|| SigError::UnknownDescriptor(descriptor.to_owned()))
    }

    pub fn name(&self) -> String {
        match self {
            SigAlgorithm::Ed25519 => "ed25519".to_owned(),
            SigAlgorithm::Mss(d) => d.name(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub scheme_id: String,
    pub bytes: Vec<u8>,
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({}, {} bytes)", self.scheme_id, self.bytes.len())
    }
}

impl Signature {
    /// `Tuple[ByteString(scheme_id), ByteString(bytes)]`
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::tuple([
            CanonicalValue::str(&self.scheme_id),
            CanonicalValue::bytes(self.bytes.clone()),
        ])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple_of(2)?;
        Ok(Signature {
            scheme_id: items[0].as_str()?.to_owned(),
            bytes: items[1].as_bytes()?.to_vec(),
        })
    }
}

enum SecretKey {
    Ed25519(SigningKey),
    Mss(Box<MssSecretKey>),
}

/// A signing key together with its public half. The few-time variant keeps a
/// counter, so signing takes `&mut self`.
pub struct SignatureKeyPair {
    pub scheme_id: String,
    pub algorithm: SigAlgorithm,
    secret: SecretKey,
    public_key: Vec<u8>,
}

impl std::fmt::Debug for SignatureKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SignatureKeyPair")
            .field("scheme_id", &self.scheme_id)
            .field("algorithm", &self.algorithm)
            .field("public_key", &hex::encode(&self.public_key))
            .finish_non_exhaustive()
    }
}

/// Persisted form of a key pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KeyPairRecord {
    pub scheme_id: String,
    pub descriptor: String,
    pub secret: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_key: Option<String>,
    #[serde(default)]
    pub next_leaf: u64,
}

impl SignatureKeyPair {
    pub fn setup<R: RngCore + ?Sized>(scheme_id: &str, descriptor: &str, rng: &mut R) -> Result<Self, SigError> {
        let algorithm = SigAlgorithm::parse(descriptor)?;
        let secret = match algorithm {
            SigAlgorithm::Ed25519 => {
                let mut seed = [0u8; 32];
                rng.fill_bytes(&mut seed);
                SecretKey::Ed25519(SigningKey::from_bytes(&seed))
            }
            SigAlgorithm::Mss(d) => SecretKey::Mss(Box::new(MssSecretKey::generate(d, Exec::default(), rng))),
        };
        Ok(Self::assemble(scheme_id, algorithm, secret))
    }

    fn assemble(scheme_id: &str, algorithm: SigAlgorithm, secret: SecretKey) -> Self {
        let public_key = match &secret {
            SecretKey::Ed25519(sk) => sk.verifying_key().to_bytes().to_vec(),
            SecretKey::Mss(sk) => sk.public.to_bytes(),
        };
        SignatureKeyPair {
            scheme_id: scheme_id.to_owned(),
            algorithm,
            secret,
            public_key,
        }
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public_key
    }

    /// Signatures left before the key is exhausted; `None` for unlimited.
    pub fn remaining(&self) -> Option<u64> {
        match &self.secret {
            SecretKey::Ed25519(_) => None,
            SecretKey::Mss(sk) => Some(sk.remaining()),
        }
    }

    pub fn sign(&mut self, m: &CanonicalValue) -> Result<Signature, SigError> {
        let bytes = match &mut self.secret {
            SecretKey::Ed25519(sk) => sk.sign(&m.encode()?).to_bytes().to_vec(),
            SecretKey::Mss(sk) => sk
                .sign(m)?
                .ok_or_else(|| SigError::KeyExhausted(self.scheme_id.clone()))?
                .to_bytes(),
        };
        Ok(Signature {
            scheme_id: self.scheme_id.clone(),
            bytes,
        })
    }

    pub fn to_record(&self) -> KeyPairRecord {
        match &self.secret {
            SecretKey::Ed25519(sk) => KeyPairRecord {
                scheme_id: self.scheme_id.clone(),
                descriptor: self.algorithm.name(),
                secret: hex::encode(sk.to_bytes()),
                tree_key: None,
                next_leaf: 0,
            },
            SecretKey::Mss(sk) => KeyPairRecord {
                scheme_id: self.scheme_id.clone(),
                descriptor: self.algorithm.name(),
                secret: hex::encode(&sk.seed),
                tree_key: Some(hex::encode(sk.public.tree_key.as_bytes())),
                next_leaf: sk.next_leaf,
            },
        }
    }

    pub fn from_record(rec: &KeyPairRecord) -> Result<Self, SigError> {
        let algorithm = SigAlgorithm::parse(&rec.descriptor)?;
        let bad = |what: &str| SigError::MalformedKey(format!("{}: {what}", rec.scheme_id));
        let secret_bytes = hex::decode(&rec.secret).map_err(|_| bad("secret is not hex"))?;
        let secret = match algorithm {
            SigAlgorithm::Ed25519 => {
                let seed: [u8; 32] = secret_bytes.try_into().map_err(|_| bad("ed25519 seed length"))?;
                SecretKey::Ed25519(SigningKey::from_bytes(&seed))
            }
            SigAlgorithm::Mss(d) => {
                let tk = rec.tree_key.as_deref().ok_or_else(|| bad("missing tree key"))?;
                let tk = hex::decode(tk).map_err(|_| bad("tree key is not hex"))?;
                let tree_key = HashKey::from_bytes(d.hash, tk)?;
                if secret_bytes.len() != d.hash.output_len() || rec.next_leaf > d.capacity() {
                    return Err(bad("mss seed or counter out of range"));
                }
                SecretKey::Mss(Box::new(MssSecretKey::from_seed(
                    d,
                    secret_bytes,
                    tree_key,
                    rec.next_leaf,
                    Exec::default(),
                )))
            }
        };
        Ok(Self::assemble(&rec.scheme_id, algorithm, secret))
    }
}

/// Plain (time-unaware) verification. Invalid input of any kind yields false.
pub fn verify(algorithm: SigAlgorithm, public_key: &[u8], m: &CanonicalValue, sig: &Signature) -> bool {
    match algorithm {
        SigAlgorithm::Ed25519 => {
            let Ok(pk) = <[u8; 32]>::try_from(public_key) else {
                return false;
            };
            let Ok(vk) = VerifyingKey::from_bytes(&pk) else {
                return false;
            };
            let Ok(s) = <[u8; 64]>::try_from(&sig.bytes[..]) else {
                return false;
            };
            let Ok(msg) = m.encode() else {
                return false;
            };
            vk.verify_strict(&msg, &ed25519_dalek::Signature::from_bytes(&s)).is_ok()
        }
        SigAlgorithm::Mss(d) => {
            let Ok(pk) = MssPublicKey::from_bytes(public_key) else {
                return false;
            };
            if pk.descriptor != d {
                return false;
            }
            let Ok(s) = MssSignature::from_bytes(&sig.bytes) else {
                return false;
            };
            mss::verify(&pk, m, &s)
        }
    }
}

/// The hash family backing an algorithm, where there is one.
pub fn algorithm_hash(algorithm: SigAlgorithm) -> Option<HashDescriptor> {
    match algorithm {
        SigAlgorithm::Ed25519 => None,
        SigAlgorithm::Mss(d) => Some(d.hash),
    }
}
