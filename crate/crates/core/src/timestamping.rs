// SPDX-License-Identifier: Apache-2.0

//! Signature-based timestamp authority.
//!
//! A token binds `m` to the authority's clock reading `t` by signing
//! `Tuple[m, UInt(t)]`. Checking a token needs the registry: the signing
//! instance must still be valid at the check time.

use rand::RngCore;
use thiserror::Error;

use crate::encoding::{CanonicalValue, EncodingError, LogicalClock, Time};
use crate::sigs::pki::PkiError;
use crate::sigs::{PkiRegistry, SchemeInstance, SchemeKind, SigError, Signature, SignatureKeyPair};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TsError {
    #[error("timestamp scheme `{id}` broke at {t_b}, clock reads {now}")]
    SchemeExpired { id: String, t_b: Time, now: Time },
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error(transparent)]
    Pki(#[from] PkiError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimestampToken {
    pub t: Time,
    pub signature: Signature,
}

impl TimestampToken {
    pub fn scheme_id(&self) -> &str {
        &self.signature.scheme_id
    }

    /// `Tuple[UInt(t), ByteString(sig), ByteString(scheme_id)]`
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::tuple([
            CanonicalValue::UInt(self.t),
            CanonicalValue::bytes(self.signature.bytes.clone()),
            CanonicalValue::str(&self.signature.scheme_id),
        ])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple_of(3)?;
        Ok(TimestampToken {
            t: items[0].as_uint()?,
            signature: Signature {
                bytes: items[1].as_bytes()?.to_vec(),
                scheme_id: items[2].as_str()?.to_owned(),
            },
        })
    }
}

pub fn stamped_message(m: &CanonicalValue, t: Time) -> CanonicalValue {
    CanonicalValue::tuple([m.clone(), CanonicalValue::UInt(t)])
}

/// A timestamp service instance: one signing key, a usage window and the
/// shared clock.
#[derive(Debug)]
pub struct TimestampService {
    key: SignatureKeyPair,
    instance: SchemeInstance,
    clock: LogicalClock,
    issued: u64,
}

impl TimestampService {
    /// Creates the key and returns the registry entry to publish alongside it.
    pub fn setup<R: RngCore + ?Sized>(
        scheme_id: &str,
        descriptor: &str,
        valid_from: Time,
        t_b: Time,
        clock: LogicalClock,
        rng: &mut R,
    ) -> Result<Self, TsError> {
        let key = SignatureKeyPair::setup(scheme_id, descriptor, rng)?;
        Ok(Self::from_key(key, valid_from, t_b, clock))
    }

    /// Setup plus publication of the new instance in `pki`.
    pub fn setup_registered<R: RngCore + ?Sized>(
        scheme_id: &str,
        descriptor: &str,
        valid_from: Time,
        t_b: Time,
        clock: LogicalClock,
        pki: &mut PkiRegistry,
        rng: &mut R,
    ) -> Result<Self, TsError> {
        let ts = Self::setup(scheme_id, descriptor, valid_from, t_b, clock, rng)?;
        pki.register(ts.instance.clone())?;
        Ok(ts)
    }

    pub fn from_key(key: SignatureKeyPair, valid_from: Time, t_b: Time, clock: LogicalClock) -> Self {
        let instance = SchemeInstance {
            scheme_id: key.scheme_id.clone(),
            kind: SchemeKind::Timestamp,
            descriptor: key.algorithm.name(),
            public_params: key.public_key().to_vec(),
            valid_from,
            t_b,
        };
        TimestampService {
            key,
            instance,
            clock,
            issued: 0,
        }
    }

    pub fn instance(&self) -> &SchemeInstance {
        &self.instance
    }

    pub fn scheme_id(&self) -> &str {
        &self.instance.scheme_id
    }

    pub fn key(&self) -> &SignatureKeyPair {
        &self.key
    }

    pub fn issued(&self) -> u64 {
        self.issued
    }

    pub fn stamp(&mut self, m: &CanonicalValue) -> Result<TimestampToken, TsError> {
        let t = self.clock.now();
        if t >= self.instance.t_b {
            return Err(TsError::SchemeExpired {
                id: self.instance.scheme_id.clone(),
                t_b: self.instance.t_b,
                now: t,
            });
        }
        let signature = self.key.sign(&stamped_message(m, t))?;
        self.issued += 1;
        log::debug!("{} issued token at t={t}", self.instance.scheme_id);
        Ok(TimestampToken { t, signature })
    }
}

/// Token check at time `t_check`, optionally pinning the token time.
pub fn ts_verify(
    pki: &PkiRegistry,
    m: &CanonicalValue,
    token: &TimestampToken,
    t_check: Time,
    t_expected: Option<Time>,
) -> bool {
    if t_expected.is_some_and(|t| t != token.t) {
        return false;
    }
    let Ok(inst) = pki.get(token.scheme_id()) else {
        return false;
    };
    if inst.kind != SchemeKind::Timestamp {
        return false;
    }
    pki.verify_signature_at(t_check, &stamped_message(m, token.t), &token.signature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn service(descriptor: &str) -> (TimestampService, PkiRegistry, LogicalClock) {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let clock = LogicalClock::new(3);
        let ts = TimestampService::setup("ts-1", descriptor, 0, 100, clock.clone(), &mut rng).unwrap();
        let mut pki = PkiRegistry::new();
        pki.register(ts.instance().clone()).unwrap();
        (ts, pki, clock)
    }

    #[test]
    fn stamp_and_check() {
        for desc in ["ed25519", "mss-sha256-h2"] {
            let (mut ts, pki, clock) = service(desc);
            let m = CanonicalValue::str("hello");
            let tok = ts.stamp(&m).unwrap();
            assert_eq!(tok.t, 3);
            assert!(ts_verify(&pki, &m, &tok, 50, None));
            assert!(ts_verify(&pki, &m, &tok, 50, Some(3)));
            assert!(!ts_verify(&pki, &m, &tok, 50, Some(4)));
            assert!(!ts_verify(&pki, &m, &tok, 100, None));
            assert!(!ts_verify(&pki, &CanonicalValue::str("hellp"), &tok, 50, None));

            // moving the token time breaks the signature
            let mut moved = tok.clone();
            moved.t = 4;
            assert!(!ts_verify(&pki, &m, &moved, 50, None));

            let back = TimestampToken::from_value(&tok.to_value()).unwrap();
            assert_eq!(back, tok);
            clock.advance_to(100);
            assert!(matches!(ts.stamp(&m), Err(TsError::SchemeExpired { .. })));
        }
    }

    #[test]
    fn unregistered_or_wrong_kind() {
        let (mut ts, _, _) = service("ed25519");
        let m = CanonicalValue::UInt(1);
        let tok = ts.stamp(&m).unwrap();
        assert!(!ts_verify(&PkiRegistry::new(), &m, &tok, 5, None));
        let mut pki = PkiRegistry::new();
        let mut inst = ts.instance().clone();
        inst.kind = SchemeKind::Signature;
        pki.register(inst).unwrap();
        assert!(!ts_verify(&pki, &m, &tok, 5, None));
    }

    #[test]
    fn budget_exhaustion() {
        let (mut ts, _, _) = service("mss-sha256-h2");
        for i in 0..4 {
            ts.stamp(&CanonicalValue::UInt(i)).unwrap();
        }
        assert_eq!(ts.issued(), 4);
        assert!(matches!(
            ts.stamp(&CanonicalValue::UInt(9)),
            Err(TsError::Sig(SigError::KeyExhausted(_)))
        ));
    }
}
