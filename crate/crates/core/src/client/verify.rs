// SPDX-License-Identifier: Apache-2.0

//! Verification of a retrieved file against its evidence.
//!
//! Entry i is checked with two reference times: the next token time (or the
//! verification time for the last entry) for timestamps and renewal
//! commitments, and the token time of the next data commitment (or the
//! verification time) for data commitments. A data commitment only loses
//! protection once a later data commitment supersedes it.

use std::fmt;

use super::RetrievedFile;
use crate::encoding::{CanonicalValue, Time};
use crate::evidence::{chain_value, evidence_value, stamp_message, EvidenceEntry, ListEntry};
use crate::sigs::{PkiRegistry, SchemeKind};
use crate::timestamping::ts_verify;
use crate::vector_com::{Opening, VectorCommitment};

/// Why verification failed; `entry` is 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    NoEvidence,
    FirstEntryNotCommitment,
    MissingOpening { entry: usize },
    Signature,
    Commitment { entry: usize },
    Timestamp { entry: usize },
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyFailure::NoEvidence => write!(f, "no evidence entries"),
            VerifyFailure::FirstEntryNotCommitment => write!(f, "first entry is not a data commitment"),
            VerifyFailure::MissingOpening { entry } => write!(f, "entry {entry}: opening missing"),
            VerifyFailure::Signature => write!(f, "data signature does not verify at the first token time"),
            VerifyFailure::Commitment { entry } => write!(f, "entry {entry}: commitment check failed"),
            VerifyFailure::Timestamp { entry } => write!(f, "entry {entry}: timestamp check failed"),
        }
    }
}

/// `Tuple[ByteString(dat), ByteString(cert), s]`
pub fn data_triple(dat: &[u8], cert: &str, s: &CanonicalValue) -> CanonicalValue {
    CanonicalValue::tuple([CanonicalValue::bytes(dat.to_vec()), CanonicalValue::str(cert), s.clone()])
}

/// The vector element a commitment renewal commits to for one file.
pub fn renewal_element(dat: &[u8], cert: &str, s: &CanonicalValue, prior: &[EvidenceEntry]) -> CanonicalValue {
    CanonicalValue::tuple([
        CanonicalValue::bytes(dat.to_vec()),
        CanonicalValue::str(cert),
        s.clone(),
        evidence_value(prior),
    ])
}

fn vc_check(pki: &PkiRegistry, vc_scheme_id: &str, t: Time, m: &CanonicalValue, c: &VectorCommitment, d: &Opening, position: u64) -> bool {
    let Ok(inst) = pki.get_kind(vc_scheme_id, SchemeKind::VectorCommitment) else {
        return false;
    };
    let Ok(params) = pki.vc_params(vc_scheme_id) else {
        return false;
    };
    inst.valid_at(t) && params.verify(m, c, d, position)
}

pub fn verify(pki: &PkiRegistry, t_verify: Time, dat: &[u8], t_store: Time, file: &RetrievedFile) -> bool {
    verify_detailed(pki, t_verify, dat, t_store, file).is_ok()
}

pub fn verify_detailed(
    pki: &PkiRegistry,
    t_verify: Time,
    dat: &[u8],
    t_store: Time,
    file: &RetrievedFile,
) -> Result<(), VerifyFailure> {
    let e = &file.entries;
    if e.is_empty() {
        return Err(VerifyFailure::NoEvidence);
    }
    if !e[0].is_com() {
        return Err(VerifyFailure::FirstEntryNotCommitment);
    }
    let s_value = file.s.to_value();
    let mut chain: Vec<ListEntry> = Vec::new();
    for (i, entry) in e.iter().enumerate() {
        let t_nt = e.get(i + 1).map_or(t_verify, |n| n.token().t);
        let t_nc = e[i + 1..]
            .iter()
            .find(|n| n.is_com())
            .map_or(t_verify, |n| n.token().t);
        let token = entry.token();
        match entry {
            EvidenceEntry::Com {
                vc_scheme_id,
                c,
                position,
                d,
                ..
            } => {
                let d = d.as_ref().ok_or(VerifyFailure::MissingOpening { entry: i })?;
                let m = if i == 0 {
                    data_triple(dat, &file.sig_scheme_id, &s_value)
                } else {
                    renewal_element(dat, &file.sig_scheme_id, &s_value, &e[..i])
                };
                if !vc_check(pki, vc_scheme_id, t_nc, &m, c, d, *position) {
                    return Err(VerifyFailure::Commitment { entry: i });
                }
                let expected = (i == 0).then_some(t_store);
                if !ts_verify(pki, &stamp_message(vc_scheme_id, c), token, t_nt, expected) {
                    return Err(VerifyFailure::Timestamp { entry: i });
                }
                if i == 0 {
                    let sig_ok = file.s.scheme_id == file.sig_scheme_id
                        && pki
                            .get_kind(&file.sig_scheme_id, SchemeKind::Signature)
                            .is_ok()
                        && pki.verify_signature_at(token.t, &CanonicalValue::bytes(dat.to_vec()), &file.s);
                    if !sig_ok {
                        return Err(VerifyFailure::Signature);
                    }
                }
                chain = vec![entry.to_list_entry()];
            }
            EvidenceEntry::Renew {
                vc_scheme_id,
                c,
                d,
                position,
                ..
            } => {
                if !vc_check(pki, vc_scheme_id, t_nt, &chain_value(&chain), c, d, *position) {
                    return Err(VerifyFailure::Commitment { entry: i });
                }
                if !ts_verify(pki, &stamp_message(vc_scheme_id, c), token, t_nt, Some(token.t)) {
                    return Err(VerifyFailure::Timestamp { entry: i });
                }
                chain.push(entry.to_list_entry());
            }
        }
    }
    Ok(())
}
