// SPDX-License-Identifier: Apache-2.0

//! Few-time hash-based signatures: Winternitz one-time keys (w = 16) whose
//! public keys are the leaves of a Merkle vector commitment. A key of height
//! `h` signs at most `2^h` messages.

use rand::RngCore;

use crate::encoding::{CanonicalValue, EncodingError, HashDescriptor, HashKey};
use crate::par::{self, Exec};
use crate::vector_com::{Opening, TreeDecommitment, VcKind, VcParams, VectorCommitment};

const W: usize = 16;
const LOG_W: usize = 4;
/// Checksum nibbles; covers up to 2*64*15 = 1920.
const CHECKSUM_LEN: usize = 3;
pub const MAX_HEIGHT: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MssDescriptor {
    pub hash: HashDescriptor,
    pub height: u32,
}

impl MssDescriptor {
    /// `mss-<sha256|sha512>-h<height>`
    pub fn parse(name: &str) -> Option<Self> {
        let rest = name.strip_prefix("mss-")?;
        let (hash, h) = rest.split_once("-h")?;
        let hash = match HashDescriptor::from_name(hash).ok()? {
            HashDescriptor::Toy8 => return None,
            other => other,
        };
        let height: u32 = h.parse().ok()?;
        (height <= MAX_HEIGHT).then_some(MssDescriptor { hash, height })
    }

    pub fn name(&self) -> String {
        format!("mss-{}-h{}", self.hash, self.height)
    }

    fn n(&self) -> usize {
        self.hash.output_len()
    }

    fn chains(&self) -> usize {
        2 * self.n() + CHECKSUM_LEN
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MssPublicKey {
    pub descriptor: MssDescriptor,
    pub tree_key: HashKey,
    pub root: VectorCommitment,
}

impl MssPublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        CanonicalValue::tuple([
            CanonicalValue::UInt(self.descriptor.height as u64),
            self.tree_key.to_value(),
            self.root.to_value(),
        ])
        .encode()
        .expect("small value")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let v = CanonicalValue::decode(bytes)?;
        let items = v.as_tuple_of(3)?;
        let height = items[0].as_uint()?;
        let tree_key = HashKey::from_value(&items[1])?;
        if height > MAX_HEIGHT as u64 || tree_key.descriptor() == HashDescriptor::Toy8 {
            return Err(EncodingError::Shape("supported mss parameters"));
        }
        Ok(MssPublicKey {
            descriptor: MssDescriptor {
                hash: tree_key.descriptor(),
                height: height as u32,
            },
            tree_key,
            root: VectorCommitment::from_value(&items[2])?,
        })
    }

    fn vc(&self) -> VcParams {
        VcParams {
            max_len: self.descriptor.capacity() as usize,
            kind: VcKind::Merkle {
                key: self.tree_key.clone(),
            },
        }
    }
}

/// Signing state. `next_leaf` only ever grows.
#[derive(Debug, Clone)]
pub struct MssSecretKey {
    pub descriptor: MssDescriptor,
    pub seed: Vec<u8>,
    pub next_leaf: u64,
    pub public: MssPublicKey,
    tree: TreeDecommitment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MssSignature {
    pub leaf: u64,
    pub chains: Vec<Vec<u8>>,
    pub path: Opening,
}

impl MssSignature {
    pub fn to_bytes(&self) -> Vec<u8> {
        CanonicalValue::tuple([
            CanonicalValue::UInt(self.leaf),
            CanonicalValue::tuple(self.chains.iter().map(|c| CanonicalValue::bytes(c.clone()))),
            self.path.to_value(),
        ])
        .encode()
        .expect("small value")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let v = CanonicalValue::decode(bytes)?;
        let items = v.as_tuple_of(3)?;
        Ok(MssSignature {
            leaf: items[0].as_uint()?,
            chains: items[1]
                .as_tuple()?
                .iter()
                .map(|c| c.as_bytes().map(<[u8]>::to_vec))
                .collect::<Result<_, _>>()?,
            path: Opening::from_value(&items[2])?,
        })
    }
}

fn chain_step(d: MssDescriptor, public_seed: &[u8], leaf: u64, chain: usize, step: usize, x: &[u8]) -> Vec<u8> {
    d.hash.digest_raw(&[
        b"wots-chain",
        public_seed,
        &leaf.to_be_bytes(),
        &(chain as u32).to_be_bytes(),
        &(step as u32).to_be_bytes(),
        x,
    ])
}

fn chain(d: MssDescriptor, public_seed: &[u8], leaf: u64, idx: usize, x: &[u8], from: usize, to: usize) -> Vec<u8> {
    let mut v = x.to_vec();
    for step in from..to {
        v = chain_step(d, public_seed, leaf, idx, step, &v);
    }
    v
}

fn chain_secret(d: MssDescriptor, seed: &[u8], leaf: u64, idx: usize) -> Vec<u8> {
    d.hash
        .digest_raw(&[b"wots-secret", seed, &leaf.to_be_bytes(), &(idx as u32).to_be_bytes()])
}

/// Base-16 digits of the message digest followed by the checksum digits.
fn digits(d: MssDescriptor, tree_key: &HashKey, m: &CanonicalValue) -> Result<Vec<usize>, EncodingError> {
    let digest = crate::encoding::hash(tree_key, &CanonicalValue::tuple([CanonicalValue::str("wots-msg"), m.clone()]))?;
    let mut out: Vec<usize> = digest
        .0
        .iter()
        .flat_map(|b| [(b >> 4) as usize, (b & 0x0f) as usize])
        .collect();
    let checksum: usize = out.iter().map(|v| W - 1 - v).sum();
    for i in (0..CHECKSUM_LEN).rev() {
        out.push((checksum >> (LOG_W * i)) & (W - 1));
    }
    debug_assert_eq!(out.len(), d.chains());
    Ok(out)
}

fn leaf_message(ends: Vec<Vec<u8>>) -> CanonicalValue {
    CanonicalValue::tuple(ends.into_iter().map(CanonicalValue::ByteString))
}

fn leaf_public(d: MssDescriptor, seed: &[u8], public_seed: &[u8], leaf: u64) -> CanonicalValue {
    let ends = (0..d.chains())
        .map(|i| chain(d, public_seed, leaf, i, &chain_secret(d, seed, leaf, i), 0, W - 1))
        .collect();
    leaf_message(ends)
}

impl MssSecretKey {
    pub fn generate<R: RngCore + ?Sized>(descriptor: MssDescriptor, exec: Exec, rng: &mut R) -> Self {
        let mut seed = vec![0u8; descriptor.n()];
        rng.fill_bytes(&mut seed);
        let tree_key = crate::encoding::keygen(descriptor.hash, rng);
        Self::from_seed(descriptor, seed, tree_key, 0, exec)
    }

    /// Rebuild the signing state from persisted material.
    pub fn from_seed(descriptor: MssDescriptor, seed: Vec<u8>, tree_key: HashKey, next_leaf: u64, exec: Exec) -> Self {
        let (root, tree) = Self::build(descriptor, &seed, &tree_key, exec);
        MssSecretKey {
            descriptor,
            seed,
            next_leaf,
            public: MssPublicKey {
                descriptor,
                tree_key,
                root,
            },
            tree,
        }
    }

    fn build(d: MssDescriptor, seed: &[u8], tree_key: &HashKey, exec: Exec) -> (VectorCommitment, TreeDecommitment) {
        let public_seed = tree_key.as_bytes().to_vec();
        let leaves = par::map_range(exec, d.capacity() as usize, |leaf| {
            leaf_public(d, seed, &public_seed, leaf as u64)
        });
        let vc = VcParams {
            max_len: d.capacity() as usize,
            kind: VcKind::Merkle { key: tree_key.clone() },
        };
        // merkle commitments draw no randomness
        let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
        vc.commit_with(exec, &leaves, &mut no_rng).expect("capacity fits")
    }

    pub fn remaining(&self) -> u64 {
        self.descriptor.capacity() - self.next_leaf
    }

    /// Returns `None` when every one-time key has been used.
    pub fn sign(&mut self, m: &CanonicalValue) -> Result<Option<MssSignature>, EncodingError> {
        if self.next_leaf >= self.descriptor.capacity() {
            return Ok(None);
        }
        let leaf = self.next_leaf;
        let d = self.descriptor;
        let public_seed = self.public.tree_key.as_bytes().to_vec();
        let digits = digits(d, &self.public.tree_key, m)?;
        let chains = digits
            .iter()
            .enumerate()
            .map(|(i, &v)| chain(d, &public_seed, leaf, i, &chain_secret(d, &self.seed, leaf, i), 0, v))
            .collect();
        let path = self
            .public
            .vc()
            .open(&self.tree, leaf as usize)
            .expect("leaf below capacity");
        self.next_leaf += 1;
        Ok(Some(MssSignature { leaf, chains, path }))
    }
}

pub fn verify(pk: &MssPublicKey, m: &CanonicalValue, sig: &MssSignature) -> bool {
    let d = pk.descriptor;
    if sig.leaf >= d.capacity() || sig.chains.len() != d.chains() || sig.path.path.len() != d.height as usize {
        return false;
    }
    if sig.chains.iter().any(|c| c.len() != d.n()) {
        return false;
    }
    let Ok(digits) = digits(d, &pk.tree_key, m) else {
        return false;
    };
    let public_seed = pk.tree_key.as_bytes();
    let ends = digits
        .iter()
        .zip(&sig.chains)
        .enumerate()
        .map(|(i, (&v, x))| chain(d, public_seed, sig.leaf, i, x, v, W - 1))
        .collect();
    pk.vc().verify(&leaf_message(ends), &pk.root, &sig.path, sig.leaf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn descriptor_parsing() {
        let d = MssDescriptor::parse("mss-sha256-h4").unwrap();
        assert_eq!((d.hash, d.height, d.chains()), (HashDescriptor::Sha256, 4, 67));
        assert_eq!(d.name(), "mss-sha256-h4");
        assert_eq!(MssDescriptor::parse("mss-sha512-h2").unwrap().chains(), 131);
        assert!(MssDescriptor::parse("mss-toy8-h2").is_none());
        assert!(MssDescriptor::parse("mss-sha256-h21").is_none());
        assert!(MssDescriptor::parse("xmss-sha256-h4").is_none());
    }

    #[test]
    fn sign_verify_until_exhausted() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let d = MssDescriptor::parse("mss-sha256-h2").unwrap();
        let mut sk = MssSecretKey::generate(d, Exec::default(), &mut rng);
        let pk = sk.public.clone();
        for i in 0..4u64 {
            let m = CanonicalValue::UInt(i);
            let s = sk.sign(&m).unwrap().unwrap();
            assert!(verify(&pk, &m, &s));
            assert!(!verify(&pk, &CanonicalValue::UInt(i + 100), &s));
            let back = MssSignature::from_bytes(&s.to_bytes()).unwrap();
            assert_eq!(back, s);
        }
        assert!(sk.sign(&CanonicalValue::Bottom).unwrap().is_none());
        assert_eq!(MssPublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
    }

    #[test]
    fn rebuilt_key_matches() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let d = MssDescriptor::parse("mss-sha256-h3").unwrap();
        let sk = MssSecretKey::generate(d, Exec::Parallel, &mut rng);
        let again = MssSecretKey::from_seed(d, sk.seed.clone(), sk.public.tree_key.clone(), 2, Exec::Sequential);
        assert_eq!(again.public, sk.public);
        assert_eq!(again.remaining(), 6);
    }
}
