// SPDX-License-Identifier: Apache-2.0

//! Vector commitments.
//!
//! * [`VcKind::Merkle`]: a Merkle tree over `H(k, m_i)` leaves, padded with
//!   `H(k, ⊥)` to the next power of two, with the root bound to the depth:
//!   `c = H(k, [l, root])`.
//! * [`VcKind::Hiding`]: every message is first committed with the hiding
//!   scheme; the Merkle tree is built over the serialized hiding commitments
//!   and an opening carries `(c_i, d_i)` next to the sibling path.
//!
//! Tree levels run from the root (level 0) to the leaves (level `l`); node
//! `(i, j)` hashes its children `(i+1, 2j)` and `(i+1, 2j+1)`.

use rand::RngCore;
use thiserror::Error;

use crate::encoding::{self, CanonicalValue, Digest, EncodingError, HashDescriptor, HashKey};
use crate::hiding_com::{HidingCommitment, HidingDecommitment, HidingError, HidingParams};
use crate::par::{self, Exec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VcError {
    #[error("vector length {n} outside 1..={max}")]
    Length { n: usize, max: usize },
    #[error("maximum length must be at least 1")]
    ZeroMaxLength,
    #[error("index {index} out of range for {len} committed messages")]
    Index { index: usize, len: usize },
    #[error("unknown vector commitment descriptor `{0}`")]
    UnknownDescriptor(String),
    #[error(transparent)]
    Hiding(#[from] HidingError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

pub type Result<T, E = VcError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VcKind {
    Merkle { key: HashKey },
    Hiding { hiding: HidingParams, key: HashKey },
}

/// Public parameters of one vector commitment instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcParams {
    pub max_len: usize,
    pub kind: VcKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VectorCommitment(pub Digest);

impl VectorCommitment {
    pub fn to_value(&self) -> CanonicalValue {
        self.0.to_value()
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        Ok(VectorCommitment(Digest::from_value(v)?))
    }
}

/// Everything `Commit` produced: the whole tree plus, for the hiding
/// variant, every per-message commitment and witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecommitment {
    /// `levels[i][j]` is node `h_{i,j}`; `levels[depth]` are the leaves.
    pub levels: Vec<Vec<Digest>>,
    pub leaf_count: usize,
    pub depth: u32,
    pub hiding: Vec<(HidingCommitment, HidingDecommitment)>,
}

/// Per-index decommitment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Opening {
    pub index: u64,
    /// Sibling digests from the leaf level up to just below the root.
    pub path: Vec<Digest>,
    pub hiding: Option<(HidingCommitment, HidingDecommitment)>,
}

impl Opening {
    /// `Tuple[UInt(i), Tuple[path..], optional Tuple[c_i, d_i]]`
    pub fn to_value(&self) -> CanonicalValue {
        let mut items = vec![
            CanonicalValue::UInt(self.index),
            CanonicalValue::tuple(self.path.iter().map(Digest::to_value)),
        ];
        if let Some((c, d)) = &self.hiding {
            items.push(CanonicalValue::tuple([c.to_value(), d.to_value()]));
        }
        CanonicalValue::Tuple(items)
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple()?;
        if !(2..=3).contains(&items.len()) {
            return Err(EncodingError::Shape("opening tuple of 2 or 3 items"));
        }
        let index = items[0].as_uint()?;
        let path = items[1]
            .as_tuple()?
            .iter()
            .map(Digest::from_value)
            .collect::<Result<Vec<_>, _>>()?;
        let hiding = match items.get(2) {
            None => None,
            Some(pair) => {
                let pair = pair.as_tuple_of(2)?;
                Some((
                    HidingCommitment::from_value(&pair[0])?,
                    HidingDecommitment::from_value(&pair[1])?,
                ))
            }
        };
        Ok(Opening { index, path, hiding })
    }
}

/// Smallest `l` with `n <= 2^l`.
pub fn depth_for(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

impl VcParams {
    /// Descriptors: `merkle-<hash>` and `hiding-<hm>-<hash>`, e.g.
    /// `merkle-sha256`, `hiding-hm256-sha256`, `hiding-hm-toy-toy8`.
    pub fn setup<R: RngCore + ?Sized>(descriptor: &str, max_len: usize, rng: &mut R) -> Result<Self> {
        if max_len == 0 {
            return Err(VcError::ZeroMaxLength);
        }
        let unknown = || VcError::UnknownDescriptor(descriptor.to_owned());
        let kind = if let Some(hash) = descriptor.strip_prefix("merkle-") {
            let hash = HashDescriptor::from_name(hash).map_err(|_| unknown())?;
            VcKind::Merkle {
                key: encoding::keygen(hash, rng),
            }
        } else if let Some(rest) = descriptor.strip_prefix("hiding-") {
            let (hm, hash) = rest.rsplit_once('-').ok_or_else(unknown)?;
            let hash = HashDescriptor::from_name(hash).map_err(|_| unknown())?;
            let hiding = HidingParams::setup(hm, rng).map_err(|_| unknown())?;
            VcKind::Hiding {
                hiding,
                key: encoding::keygen(hash, rng),
            }
        } else {
            return Err(unknown());
        };
        Ok(VcParams { max_len, kind })
    }

    pub fn is_hiding(&self) -> bool {
        matches!(self.kind, VcKind::Hiding { .. })
    }

    fn tree_key(&self) -> &HashKey {
        match &self.kind {
            VcKind::Merkle { key } | VcKind::Hiding { key, .. } => key,
        }
    }

    /// `Tuple[UInt(L), Tuple["merkle", key] | Tuple["hiding", hiding params, key]]`
    pub fn to_value(&self) -> CanonicalValue {
        let kind = match &self.kind {
            VcKind::Merkle { key } => CanonicalValue::tuple([CanonicalValue::str("merkle"), key.to_value()]),
            VcKind::Hiding { hiding, key } => CanonicalValue::tuple([
                CanonicalValue::str("hiding"),
                hiding.to_value(),
                key.to_value(),
            ]),
        };
        CanonicalValue::tuple([CanonicalValue::UInt(self.max_len as u64), kind])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self> {
        let items = v.as_tuple_of(2)?;
        let max_len = items[0].as_uint()? as usize;
        if max_len == 0 {
            return Err(VcError::ZeroMaxLength);
        }
        let kind = items[1].as_tuple()?;
        let kind = match (kind.first().map(CanonicalValue::as_str), kind.len()) {
            (Some(Ok("merkle")), 2) => VcKind::Merkle {
                key: HashKey::from_value(&kind[1])?,
            },
            (Some(Ok("hiding")), 3) => VcKind::Hiding {
                hiding: HidingParams::from_value(&kind[1])?,
                key: HashKey::from_value(&kind[2])?,
            },
            _ => return Err(EncodingError::Shape("merkle or hiding parameters").into()),
        };
        Ok(VcParams { max_len, kind })
    }

    /// Commit using the default execution mode.
    pub fn commit<R: RngCore + ?Sized>(
        &self,
        messages: &[CanonicalValue],
        rng: &mut R,
    ) -> Result<(VectorCommitment, TreeDecommitment)> {
        self.commit_with(Exec::default(), messages, rng)
    }

    pub fn commit_with<R: RngCore + ?Sized>(
        &self,
        exec: Exec,
        messages: &[CanonicalValue],
        rng: &mut R,
    ) -> Result<(VectorCommitment, TreeDecommitment)> {
        let n = messages.len();
        if n == 0 || n > self.max_len {
            return Err(VcError::Length { n, max: self.max_len });
        }
        let key = self.tree_key();
        let (leaf_inputs, hiding) = match &self.kind {
            VcKind::Merkle { .. } => (None, Vec::new()),
            VcKind::Hiding { hiding, .. } => {
                let pairs = par::map_seeded(exec, messages, rng, |m, r| hiding.commit(m, r))
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()?;
                let values: Vec<CanonicalValue> = pairs.iter().map(|(c, _)| c.to_value()).collect();
                (Some(values), pairs)
            }
        };
        let inputs = leaf_inputs.as_deref().unwrap_or(messages);
        let leaves = par::map(exec, inputs, |m| encoding::hash(key, m))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let (c, levels) = build_tree(key, leaves)?;
        let depth = depth_for(n);
        Ok((
            c,
            TreeDecommitment {
                levels,
                leaf_count: n,
                depth,
                hiding,
            },
        ))
    }

    pub fn open(&self, d: &TreeDecommitment, index: usize) -> Result<Opening> {
        if index >= d.leaf_count {
            return Err(VcError::Index {
                index,
                len: d.leaf_count,
            });
        }
        let mut path = Vec::with_capacity(d.depth as usize);
        let mut a = index;
        for level in (1..=d.depth as usize).rev() {
            // sibling of a: a+1 for even a, a-1 for odd a
            path.push(d.levels[level][a ^ 1].clone());
            a /= 2;
        }
        let hiding = match self.kind {
            VcKind::Merkle { .. } => None,
            VcKind::Hiding { .. } => Some(d.hiding[index].clone()),
        };
        Ok(Opening {
            index: index as u64,
            path,
            hiding,
        })
    }

    pub fn verify(&self, m: &CanonicalValue, c: &VectorCommitment, d: &Opening, index: u64) -> bool {
        if d.index != index {
            return false;
        }
        let depth = d.path.len();
        // the declared depth must fit the parameter's maximum length and the index
        if depth > 63 || depth > depth_for(self.max_len) as usize || index >= (1u64 << depth) {
            return false;
        }
        let key = self.tree_key();
        let leaf_input = match (&self.kind, &d.hiding) {
            (VcKind::Merkle { .. }, None) => m.clone(),
            (VcKind::Hiding { hiding, .. }, Some((ci, di))) => {
                if !hiding.verify(m, ci, di) {
                    return false;
                }
                ci.to_value()
            }
            _ => return false,
        };
        let Ok(mut h) = encoding::hash(key, &leaf_input) else {
            return false;
        };
        let out_len = key.descriptor().output_len();
        let mut a = index;
        for g in &d.path {
            if g.0.len() != out_len {
                return false;
            }
            let pair = if a % 2 == 0 {
                [h.to_value(), g.to_value()]
            } else {
                [g.to_value(), h.to_value()]
            };
            h = match encoding::hash(key, &CanonicalValue::tuple(pair)) {
                Ok(h) => h,
                Err(_) => return false,
            };
            a /= 2;
        }
        match root_commitment(key, depth as u32, &h) {
            Ok(c2) => &c2 == c,
            Err(_) => false,
        }
    }
}

fn root_commitment(key: &HashKey, depth: u32, root: &Digest) -> Result<VectorCommitment> {
    let v = CanonicalValue::tuple([CanonicalValue::UInt(depth as u64), root.to_value()]);
    Ok(VectorCommitment(encoding::hash(key, &v)?))
}

/// Build all levels over the given leaves (padded with `H(k, ⊥)`), return the
/// depth-bound root commitment and the levels root-first.
fn build_tree(key: &HashKey, mut leaves: Vec<Digest>) -> Result<(VectorCommitment, Vec<Vec<Digest>>)> {
    let depth = depth_for(leaves.len());
    let bottom = encoding::hash(key, &CanonicalValue::Bottom)?;
    leaves.resize(1usize << depth, bottom);
    let mut levels = vec![leaves];
    while levels.last().map_or(0, Vec::len) > 1 {
        let below = levels.last().expect("nonempty");
        let above = below
            .chunks(2)
            .map(|pair| {
                encoding::hash(
                    key,
                    &CanonicalValue::tuple([pair[0].to_value(), pair[1].to_value()]),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        levels.push(above);
    }
    levels.reverse();
    let c = root_commitment(key, depth, &levels[0][0])?;
    Ok((c, levels))
}
