// SPDX-License-Identifier: Apache-2.0

//! Registry of scheme instances with usage periods and breakage times.
//!
//! An instance is usable on `[valid_from, t_b)`: from its breakage time on,
//! anything it vouches for is treated as forgeable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SigAlgorithm, Signature};
use crate::encoding::{CanonicalValue, Time};
use crate::vector_com::VcParams;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PkiError {
    #[error("scheme `{0}` is not registered")]
    Unregistered(String),
    #[error("scheme `{0}` is already registered")]
    Duplicate(String),
    #[error("scheme `{id}`: valid_from {valid_from} must precede t_b {t_b}")]
    Period { id: String, valid_from: Time, t_b: Time },
    #[error("scheme `{id}` is a {actual:?}, expected {expected:?}")]
    Kind {
        id: String,
        expected: SchemeKind,
        actual: SchemeKind,
    },
    #[error("scheme `{0}` has malformed public parameters")]
    Params(String),
    #[error("registry json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Signature,
    Timestamp,
    VectorCommitment,
    HidingCommitment,
    Sharing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeInstance {
    pub scheme_id: String,
    pub kind: SchemeKind,
    pub descriptor: String,
    #[serde(with = "hex_bytes")]
    pub public_params: Vec<u8>,
    pub valid_from: Time,
    pub t_b: Time,
}

impl SchemeInstance {
    pub fn valid_at(&self, t: Time) -> bool {
        self.valid_from <= t && t < self.t_b
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PkiRegistry {
    instances: BTreeMap<String, SchemeInstance>,
}

impl PkiRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, instance: SchemeInstance) -> Result<(), PkiError> {
        if instance.valid_from >= instance.t_b {
            return Err(PkiError::Period {
                id: instance.scheme_id,
                valid_from: instance.valid_from,
                t_b: instance.t_b,
            });
        }
        if self.instances.contains_key(&instance.scheme_id) {
            return Err(PkiError::Duplicate(instance.scheme_id));
        }
        self.instances.insert(instance.scheme_id.clone(), instance);
        Ok(())
    }

    pub fn get(&self, scheme_id: &str) -> Result<&SchemeInstance, PkiError> {
        self.instances
            .get(scheme_id)
            .ok_or_else(|| PkiError::Unregistered(scheme_id.to_owned()))
    }

    pub fn get_kind(&self, scheme_id: &str, expected: SchemeKind) -> Result<&SchemeInstance, PkiError> {
        let inst = self.get(scheme_id)?;
        if inst.kind != expected {
            return Err(PkiError::Kind {
                id: scheme_id.to_owned(),
                expected,
                actual: inst.kind,
            });
        }
        Ok(inst)
    }

    pub fn valid_at(&self, scheme_id: &str, t: Time) -> Result<bool, PkiError> {
        Ok(self.get(scheme_id)?.valid_at(t))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SchemeInstance> {
        self.instances.values()
    }

    /// The instance of `kind` valid at `t` with the latest `valid_from`.
    pub fn current(&self, kind: SchemeKind, t: Time) -> Option<&SchemeInstance> {
        self.instances
            .values()
            .filter(|i| i.kind == kind && i.valid_at(t))
            .max_by(|a, b| (a.valid_from, &a.scheme_id).cmp(&(b.valid_from, &b.scheme_id)))
    }

    /// Public vector commitment parameters of a registered instance.
    pub fn vc_params(&self, scheme_id: &str) -> Result<VcParams, PkiError> {
        let inst = self.get_kind(scheme_id, SchemeKind::VectorCommitment)?;
        CanonicalValue::decode(&inst.public_params)
            .ok()
            .and_then(|v| VcParams::from_value(&v).ok())
            .ok_or_else(|| PkiError::Params(scheme_id.to_owned()))
    }

    /// Signature check plus validity of the signing instance at `t`. The
    /// instance may be a data-signing or a timestamping key.
    pub fn verify_signature_at(&self, t: Time, m: &CanonicalValue, sig: &Signature) -> bool {
        let Ok(inst) = self.get(&sig.scheme_id) else {
            return false;
        };
        if !matches!(inst.kind, SchemeKind::Signature | SchemeKind::Timestamp) {
            return false;
        }
        let Ok(alg) = SigAlgorithm::parse(&inst.descriptor) else {
            return false;
        };
        inst.valid_at(t) && super::verify(alg, &inst.public_params, m, sig)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<&SchemeInstance> = self.instances.values().collect();
        serde_json::to_string_pretty(&list).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self, PkiError> {
        let list: Vec<SchemeInstance> = serde_json::from_str(s).map_err(|e| PkiError::Json(e.to_string()))?;
        let mut reg = PkiRegistry::new();
        for inst in list {
            reg.register(inst)?;
        }
        Ok(reg)
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, valid_from: Time, t_b: Time) -> SchemeInstance {
        SchemeInstance {
            scheme_id: id.into(),
            kind: SchemeKind::Signature,
            descriptor: "ed25519".into(),
            public_params: vec![1, 2, 3],
            valid_from,
            t_b,
        }
    }

    #[test]
    fn validity_window() {
        let mut pki = PkiRegistry::new();
        pki.register(inst("a", 0, 10)).unwrap();
        assert!(pki.valid_at("a", 5).unwrap());
        assert!(pki.valid_at("a", 0).unwrap());
        assert!(!pki.valid_at("a", 10).unwrap());
        assert!(!pki.valid_at("a", 11).unwrap());
        assert_eq!(pki.valid_at("b", 1), Err(PkiError::Unregistered("b".into())));
    }

    #[test]
    fn register_checks() {
        let mut pki = PkiRegistry::new();
        assert!(matches!(pki.register(inst("a", 5, 5)), Err(PkiError::Period { .. })));
        pki.register(inst("a", 0, 5)).unwrap();
        assert_eq!(pki.register(inst("a", 0, 6)), Err(PkiError::Duplicate("a".into())));
    }

    #[test]
    fn current_prefers_latest() {
        let mut pki = PkiRegistry::new();
        pki.register(inst("old", 0, 20)).unwrap();
        pki.register(inst("new", 10, 30)).unwrap();
        assert_eq!(pki.current(SchemeKind::Signature, 5).unwrap().scheme_id, "old");
        assert_eq!(pki.current(SchemeKind::Signature, 12).unwrap().scheme_id, "new");
        assert!(pki.current(SchemeKind::Timestamp, 12).is_none());
        assert!(pki.current(SchemeKind::Signature, 30).is_none());
    }

    #[test]
    fn json_layout() {
        let mut pki = PkiRegistry::new();
        pki.register(inst("a", 0, 10)).unwrap();
        let json = pki.to_json();
        let raw: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(raw[0]["public_params"], "010203");
        assert_eq!(raw[0]["kind"], "signature");
        assert_eq!(raw[0]["t_b"], 10);
        assert_eq!(PkiRegistry::from_json(&json).unwrap(), pki);
    }

    proptest::proptest! {
        #[test]
        fn invalid_from_breakage_on(t_b in 1u64..1000, t in 0u64..2000) {
            let mut pki = PkiRegistry::new();
            pki.register(inst("a", 0, t_b)).unwrap();
            if t >= t_b {
                proptest::prop_assert!(!pki.valid_at("a", t).unwrap());
            }
        }
    }
}
