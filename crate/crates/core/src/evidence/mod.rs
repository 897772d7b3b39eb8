// SPDX-License-Identifier: Apache-2.0

//! Evidence records and the evidence service.
//!
//! The service keeps an arena of append-only lists. A storage batch shares
//! one list until the next commitment renewal puts every name on a single
//! fresh list; a name's evidence is the concatenation of its list segments.
//! The vector position of a name inside a commitment differs between names
//! sharing a list, so it lives in the per-name index rather than in the list.

pub mod net;
pub mod service;

use thiserror::Error;

use crate::encoding::{CanonicalValue, EncodingError};
use crate::timestamping::{TimestampToken, TsError};
use crate::vector_com::{Opening, VcError, VectorCommitment};

pub use service::EvidenceService;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("name `{0}` is already present")]
    DuplicateName(String),
    #[error("no position supplied for `{0}`")]
    PositionMissing(String),
    #[error("position supplied for unknown name `{0}`")]
    PositionUnexpected(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no timestamp authority `{0}` attached")]
    UnknownTsa(String),
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error(transparent)]
    Vc(#[from] VcError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("remote: {0}")]
    Remote(String),
}

impl From<std::io::Error> for EvidenceError {
    fn from(e: std::io::Error) -> Self {
        EvidenceError::Io(e.to_string())
    }
}

pub type Result<T, E = EvidenceError> = std::result::Result<T, E>;

/// The message a timestamp authority signs for a commitment.
pub fn stamp_message(vc_scheme_id: &str, c: &VectorCommitment) -> CanonicalValue {
    CanonicalValue::tuple([CanonicalValue::str(vc_scheme_id), c.to_value()])
}

/// An entry as stored in a shared list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ListEntry {
    Com {
        vc_scheme_id: String,
        c: VectorCommitment,
        token: TimestampToken,
    },
    Renew {
        vc_scheme_id: String,
        c: VectorCommitment,
        d: Opening,
        position: u64,
        token: TimestampToken,
    },
}

impl ListEntry {
    pub fn token(&self) -> &TimestampToken {
        match self {
            ListEntry::Com { token, .. } | ListEntry::Renew { token, .. } => token,
        }
    }

    /// `Tuple["com", vc, c, token]` or `Tuple["renew", vc, c, d, UInt(pos), token]`
    pub fn to_value(&self) -> CanonicalValue {
        match self {
            ListEntry::Com { vc_scheme_id, c, token } => CanonicalValue::tuple([
                CanonicalValue::str("com"),
                CanonicalValue::str(vc_scheme_id),
                c.to_value(),
                token.to_value(),
            ]),
            ListEntry::Renew {
                vc_scheme_id,
                c,
                d,
                position,
                token,
            } => CanonicalValue::tuple([
                CanonicalValue::str("renew"),
                CanonicalValue::str(vc_scheme_id),
                c.to_value(),
                d.to_value(),
                CanonicalValue::UInt(*position),
                token.to_value(),
            ]),
        }
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple()?;
        match (items.first().map(CanonicalValue::as_str), items.len()) {
            (Some(Ok("com")), 4) => Ok(ListEntry::Com {
                vc_scheme_id: items[1].as_str()?.to_owned(),
                c: VectorCommitment::from_value(&items[2])?,
                token: TimestampToken::from_value(&items[3])?,
            }),
            (Some(Ok("renew")), 6) => Ok(ListEntry::Renew {
                vc_scheme_id: items[1].as_str()?.to_owned(),
                c: VectorCommitment::from_value(&items[2])?,
                d: Opening::from_value(&items[3])?,
                position: items[4].as_uint()?,
                token: TimestampToken::from_value(&items[5])?,
            }),
            _ => Err(EncodingError::Shape("list entry")),
        }
    }
}

/// Canonical value of a list (or of a verifier's running chain).
pub fn chain_value(entries: &[ListEntry]) -> CanonicalValue {
    CanonicalValue::tuple(entries.iter().map(ListEntry::to_value))
}

/// One entry of a name's evidence. `Com` carries the name's position in the
/// committed vector and, once retrieved from the shareholders, its opening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvidenceEntry {
    Com {
        vc_scheme_id: String,
        c: VectorCommitment,
        position: u64,
        d: Option<Opening>,
        token: TimestampToken,
    },
    Renew {
        vc_scheme_id: String,
        c: VectorCommitment,
        d: Opening,
        position: u64,
        token: TimestampToken,
    },
}

impl EvidenceEntry {
    pub fn from_list_entry(e: &ListEntry, com_position: u64) -> Self {
        match e.clone() {
            ListEntry::Com { vc_scheme_id, c, token } => EvidenceEntry::Com {
                vc_scheme_id,
                c,
                position: com_position,
                d: None,
                token,
            },
            ListEntry::Renew {
                vc_scheme_id,
                c,
                d,
                position,
                token,
            } => EvidenceEntry::Renew {
                vc_scheme_id,
                c,
                d,
                position,
                token,
            },
        }
    }

    /// The form this entry takes inside a shared list.
    pub fn to_list_entry(&self) -> ListEntry {
        match self.clone() {
            EvidenceEntry::Com {
                vc_scheme_id, c, token, ..
            } => ListEntry::Com { vc_scheme_id, c, token },
            EvidenceEntry::Renew {
                vc_scheme_id,
                c,
                d,
                position,
                token,
            } => ListEntry::Renew {
                vc_scheme_id,
                c,
                d,
                position,
                token,
            },
        }
    }

    pub fn token(&self) -> &TimestampToken {
        match self {
            EvidenceEntry::Com { token, .. } | EvidenceEntry::Renew { token, .. } => token,
        }
    }

    pub fn is_com(&self) -> bool {
        matches!(self, EvidenceEntry::Com { .. })
    }

    /// `Tuple["com", vc, c, UInt(pos), Tuple[d?], token]` or the renew form
    /// of [`ListEntry::to_value`].
    pub fn to_value(&self) -> CanonicalValue {
        match self {
            EvidenceEntry::Com {
                vc_scheme_id,
                c,
                position,
                d,
                token,
            } => CanonicalValue::tuple([
                CanonicalValue::str("com"),
                CanonicalValue::str(vc_scheme_id),
                c.to_value(),
                CanonicalValue::UInt(*position),
                CanonicalValue::tuple(d.iter().map(Opening::to_value)),
                token.to_value(),
            ]),
            EvidenceEntry::Renew { .. } => self.to_list_entry().to_value(),
        }
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple()?;
        match (items.first().map(CanonicalValue::as_str), items.len()) {
            (Some(Ok("com")), 6) => {
                let d = match items[4].as_tuple()? {
                    [] => None,
                    [d] => Some(Opening::from_value(d)?),
                    _ => return Err(EncodingError::Shape("at most one opening")),
                };
                Ok(EvidenceEntry::Com {
                    vc_scheme_id: items[1].as_str()?.to_owned(),
                    c: VectorCommitment::from_value(&items[2])?,
                    position: items[3].as_uint()?,
                    d,
                    token: TimestampToken::from_value(&items[5])?,
                })
            }
            (Some(Ok("renew")), 6) => Ok(EvidenceEntry::from_list_entry(&ListEntry::from_value(v)?, 0)),
            _ => Err(EncodingError::Shape("evidence entry")),
        }
    }
}

pub fn evidence_value(entries: &[EvidenceEntry]) -> CanonicalValue {
    CanonicalValue::tuple(entries.iter().map(EvidenceEntry::to_value))
}

pub fn evidence_from_value(v: &CanonicalValue) -> Result<Vec<EvidenceEntry>, EncodingError> {
    v.as_tuple()?.iter().map(EvidenceEntry::from_value).collect()
}

/// What a data owner needs from an evidence service, local or remote.
pub trait EvidenceApi {
    fn add_com(&mut self, names: &[String], vc_scheme_id: &str, c: &VectorCommitment, ts_scheme_id: &str)
        -> Result<TimestampToken>;
    /// `vc_params` is the public parameter value of `vc_scheme_id`. `None`
    /// when there was nothing to renew.
    fn renew_ts(
        &mut self,
        vc_scheme_id: &str,
        vc_params: &CanonicalValue,
        ts_scheme_id: &str,
    ) -> Result<Option<TimestampToken>>;
    fn add_com_renew(
        &mut self,
        vc_scheme_id: &str,
        c: &VectorCommitment,
        positions: &[(String, u64)],
        ts_scheme_id: &str,
    ) -> Result<TimestampToken>;
    fn get_evidence(&mut self, name: &str) -> Result<Vec<EvidenceEntry>>;
    fn names(&mut self) -> Result<Vec<String>>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Digest;
    use crate::sigs::Signature;

    fn token(t: u64) -> TimestampToken {
        TimestampToken {
            t,
            signature: Signature {
                scheme_id: "ts".into(),
                bytes: vec![1, 2, 3],
            },
        }
    }

    fn opening() -> Opening {
        Opening {
            index: 1,
            path: vec![Digest(vec![9; 32])],
            hiding: None,
        }
    }

    #[test]
    fn entry_values_roundtrip() {
        let c = VectorCommitment(Digest(vec![7; 32]));
        let com = EvidenceEntry::Com {
            vc_scheme_id: "vc".into(),
            c: c.clone(),
            position: 4,
            d: Some(opening()),
            token: token(1),
        };
        let renew = EvidenceEntry::Renew {
            vc_scheme_id: "vc2".into(),
            c,
            d: opening(),
            position: 1,
            token: token(2),
        };
        let v = evidence_value(&[com.clone(), renew.clone()]);
        assert_eq!(evidence_from_value(&v).unwrap(), vec![com.clone(), renew.clone()]);
        for e in [&com, &renew] {
            let le = e.to_list_entry();
            assert_eq!(ListEntry::from_value(&le.to_value()).unwrap(), le);
        }
        // the list form drops position and opening of a com entry
        let back = EvidenceEntry::from_list_entry(&com.to_list_entry(), 4);
        assert!(matches!(back, EvidenceEntry::Com { d: None, position: 4, .. }));
        assert_eq!(renew.to_value(), renew.to_list_entry().to_value());
    }
}
