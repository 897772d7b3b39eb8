// SPDX-License-Identifier: Apache-2.0

//! `<name>.evidence` files: the magic `ELSA`, version byte 0x01, then the
//! canonical encoding of `Tuple[sha256(dat), sig_scheme_id, s, entries...]`.
//! The data itself travels separately.

use sha2::{Digest as _, Sha256};

use super::RetrievedFile;
use crate::encoding::{CanonicalValue, EncodingError};
use crate::evidence::EvidenceEntry;
use crate::sigs::Signature;

pub const MAGIC: &[u8; 4] = b"ELSA";
pub const VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceBundle {
    pub dat_hash: [u8; 32],
    pub sig_scheme_id: String,
    pub s: Signature,
    pub entries: Vec<EvidenceEntry>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum BundleError {
    #[error("not an evidence bundle")]
    Magic,
    #[error("unsupported bundle version {0}")]
    Version(u8),
    #[error("data does not match the bundle's hash")]
    DataMismatch,
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

pub fn sha256(dat: &[u8]) -> [u8; 32] {
    Sha256::digest(dat).into()
}

impl EvidenceBundle {
    pub fn from_retrieved(f: &RetrievedFile) -> Self {
        EvidenceBundle {
            dat_hash: sha256(&f.dat),
            sig_scheme_id: f.sig_scheme_id.clone(),
            s: f.s.clone(),
            entries: f.entries.clone(),
        }
    }

    pub fn to_value(&self) -> CanonicalValue {
        let head = [
            CanonicalValue::bytes(self.dat_hash.to_vec()),
            CanonicalValue::str(&self.sig_scheme_id),
            self.s.to_value(),
        ];
        CanonicalValue::tuple(head.into_iter().chain(self.entries.iter().map(EvidenceEntry::to_value)))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BundleError> {
        let mut out = MAGIC.to_vec();
        out.push(VERSION);
        self.to_value().encode_into(&mut out)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        let rest = bytes.strip_prefix(MAGIC).ok_or(BundleError::Magic)?;
        let (&version, body) = rest.split_first().ok_or(BundleError::Magic)?;
        if version != VERSION {
            return Err(BundleError::Version(version));
        }
        let v = CanonicalValue::decode(body)?;
        let items = v.as_tuple()?;
        if items.len() < 3 {
            return Err(EncodingError::Shape("bundle header").into());
        }
        let dat_hash = items[0]
            .as_bytes()?
            .try_into()
            .map_err(|_| EncodingError::Shape("32-byte data hash"))?;
        Ok(EvidenceBundle {
            dat_hash,
            sig_scheme_id: items[1].as_str()?.to_owned(),
            s: Signature::from_value(&items[2])?,
            entries: items[3..]
                .iter()
                .map(EvidenceEntry::from_value)
                .collect::<Result<_, _>>()?,
        })
    }

    /// Reattaches the data, checking it against the recorded hash.
    pub fn with_data(self, dat: Vec<u8>) -> Result<RetrievedFile, BundleError> {
        if sha256(&dat) != self.dat_hash {
            return Err(BundleError::DataMismatch);
        }
        Ok(RetrievedFile {
            dat,
            sig_scheme_id: self.sig_scheme_id,
            s: self.s,
            entries: self.entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_checks() {
        let b = EvidenceBundle {
            dat_hash: sha256(b"x"),
            sig_scheme_id: "sig".into(),
            s: Signature {
                scheme_id: "sig".into(),
                bytes: vec![1],
            },
            entries: vec![],
        };
        let bytes = b.to_bytes().unwrap();
        assert_eq!(&bytes[..5], b"ELSA\x01");
        assert_eq!(EvidenceBundle::from_bytes(&bytes).unwrap(), b);
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert_eq!(EvidenceBundle::from_bytes(&v2), Err(BundleError::Version(2)));
        assert_eq!(EvidenceBundle::from_bytes(b"ELS"), Err(BundleError::Magic));
        assert_eq!(b.clone().with_data(b"y".to_vec()), Err(BundleError::DataMismatch));
        assert!(b.with_data(b"x".to_vec()).is_ok());
    }
}
