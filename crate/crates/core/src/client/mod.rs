// SPDX-License-Identifier: Apache-2.0

//! The data owner: stores batches, drives renewals, retrieves files with
//! their evidence. Verification lives in [`verify`] and needs only the
//! registry.

pub mod bundle;
pub mod verify;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::encoding::{CanonicalValue, EncodingError, LogicalClock, Time};
use crate::evidence::{EvidenceApi, EvidenceEntry, EvidenceError, EvidenceService};
use crate::par::Exec;
use crate::sharing::{ShareCluster, SharingError};
use crate::sigs::pki::PkiError;
use crate::sigs::{PkiRegistry, SchemeInstance, SchemeKind, SigError, Signature, SignatureKeyPair};
use crate::timestamping::TimestampToken;
use crate::vector_com::{Opening, VcError, VcParams, VectorCommitment};

pub use verify::{verify, verify_detailed, VerifyFailure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClientError {
    #[error("name `{0}` already stored")]
    DuplicateName(String),
    #[error("batch of {n} exceeds the commitment's maximum length {max}")]
    BatchTooLarge { n: usize, max: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("archive already holds data")]
    NotEmpty,
    #[error("archive holds no data")]
    Empty,
    #[error("no signing key `{0}`")]
    UnknownSigner(String),
    #[error("scheme `{id}` is not valid at {t}")]
    SchemeNotValid { id: String, t: Time },
    #[error("stored record for `{0}` is malformed")]
    Corrupt(String),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error(transparent)]
    Vc(#[from] VcError),
    #[error(transparent)]
    Pki(#[from] PkiError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

pub type Result<T, E = ClientError> = std::result::Result<T, E>;

/// A file with everything needed to verify it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievedFile {
    pub dat: Vec<u8>,
    pub sig_scheme_id: String,
    pub s: Signature,
    pub entries: Vec<EvidenceEntry>,
}

pub fn data_key(name: &str) -> String {
    format!("data/{name}")
}

pub fn decom_key(name: &str, entry: usize) -> String {
    format!("decom/{name}/{entry}")
}

fn decom_value(position: u64, d: &Opening) -> CanonicalValue {
    CanonicalValue::tuple([CanonicalValue::UInt(position), d.to_value()])
}

/// What one `store` call produced.
#[derive(Debug, Clone)]
pub struct StoreReceipt {
    pub c: VectorCommitment,
    pub token: TimestampToken,
}

pub struct Archive<E: EvidenceApi> {
    pub pki: PkiRegistry,
    pub clock: LogicalClock,
    sh: ShareCluster,
    es: E,
    signers: BTreeMap<String, SignatureKeyPair>,
    rng: ChaCha20Rng,
    exec: Exec,
}

impl<E: EvidenceApi> std::fmt::Debug for Archive<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Archive")
            .field("now", &self.clock.now())
            .field("sharing", &self.sh)
            .finish_non_exhaustive()
    }
}

impl<E: EvidenceApi> Archive<E> {
    /// Starts an archive over empty services. With `force`, existing
    /// content is tolerated.
    pub fn init(
        mut sh: ShareCluster,
        mut es: E,
        pki: PkiRegistry,
        clock: LogicalClock,
        seed: u64,
        force: bool,
    ) -> Result<Self> {
        if !force && (!sh.names()?.is_empty() || !es.names()?.is_empty()) {
            return Err(ClientError::NotEmpty);
        }
        Ok(Archive {
            pki,
            clock,
            sh,
            es,
            signers: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn sharing(&mut self) -> &mut ShareCluster {
        &mut self.sh
    }

    pub fn evidence(&mut self) -> &mut E {
        &mut self.es
    }

    pub fn evidence_ref(&self) -> &E {
        &self.es
    }

    pub fn signers(&self) -> impl Iterator<Item = &SignatureKeyPair> {
        self.signers.values()
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// Adds a data-signing key and publishes it.
    pub fn add_signer(&mut self, key: SignatureKeyPair, valid_from: Time, t_b: Time) -> Result<()> {
        self.pki.register(SchemeInstance {
            scheme_id: key.scheme_id.clone(),
            kind: SchemeKind::Signature,
            descriptor: key.algorithm.name(),
            public_params: key.public_key().to_vec(),
            valid_from,
            t_b,
        })?;
        self.signers.insert(key.scheme_id.clone(), key);
        Ok(())
    }

    /// Re-attaches a signer whose instance is already registered.
    pub fn restore_signer(&mut self, key: SignatureKeyPair) {
        self.signers.insert(key.scheme_id.clone(), key);
    }

    /// Generates and publishes vector commitment parameters.
    pub fn add_vc(&mut self, scheme_id: &str, descriptor: &str, max_len: usize, valid_from: Time, t_b: Time) -> Result<VcParams> {
        let params = VcParams::setup(descriptor, max_len, &mut self.rng)?;
        self.pki.register(SchemeInstance {
            scheme_id: scheme_id.to_owned(),
            kind: SchemeKind::VectorCommitment,
            descriptor: descriptor.to_owned(),
            public_params: params.to_value().encode()?,
            valid_from,
            t_b,
        })?;
        Ok(params)
    }

    fn valid_now(&self, id: &str, kind: SchemeKind) -> Result<()> {
        let now = self.clock.now();
        if !self.pki.get_kind(id, kind)?.valid_at(now) {
            return Err(ClientError::SchemeNotValid { id: id.to_owned(), t: now });
        }
        Ok(())
    }

    fn vc_for_use(&self, vc_scheme_id: &str) -> Result<VcParams> {
        self.valid_now(vc_scheme_id, SchemeKind::VectorCommitment)?;
        Ok(self.pki.vc_params(vc_scheme_id)?)
    }

    /// Signs, shares and commits a batch, then registers it with the
    /// evidence service under one timestamp.
    pub fn store(&mut self, files: &[(String, Vec<u8>)], sig_scheme_id: &str, vc_scheme_id: &str, ts_scheme_id: &str) -> Result<StoreReceipt> {
        if files.is_empty() {
            return Err(ClientError::EmptyBatch);
        }
        let vc = self.vc_for_use(vc_scheme_id)?;
        if files.len() > vc.max_len {
            return Err(ClientError::BatchTooLarge {
                n: files.len(),
                max: vc.max_len,
            });
        }
        self.valid_now(sig_scheme_id, SchemeKind::Signature)?;
        let existing = self.es.names()?;
        let mut seen = std::collections::BTreeSet::new();
        for (name, _) in files {
            if existing.binary_search(name).is_ok() || !seen.insert(name) || self.sh.contains(&data_key(name))? {
                return Err(ClientError::DuplicateName(name.clone()));
            }
        }
        let signer = self
            .signers
            .get_mut(sig_scheme_id)
            .ok_or_else(|| ClientError::UnknownSigner(sig_scheme_id.to_owned()))?;
        let mut triples = Vec::with_capacity(files.len());
        for (_, dat) in files {
            let s = signer.sign(&CanonicalValue::bytes(dat.clone()))?;
            triples.push(verify::data_triple(dat, sig_scheme_id, &s.to_value()));
        }
        for ((name, _), triple) in files.iter().zip(&triples) {
            self.sh.store(&data_key(name), triple, false)?;
        }
        let (c, tree) = vc.commit_with(self.exec, &triples, &mut self.rng)?;
        for (i, (name, _)) in files.iter().enumerate() {
            let d = vc.open(&tree, i)?;
            self.sh.store(&decom_key(name, 0), &decom_value(i as u64, &d), false)?;
        }
        let names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
        let token = self.es.add_com(&names, vc_scheme_id, &c, ts_scheme_id)?;
        log::info!("stored {} files at t={}", names.len(), token.t);
        Ok(StoreReceipt { c, token })
    }

    /// Asks the evidence service to renew timestamps; it needs only public
    /// parameters.
    pub fn renew_ts(&mut self, vc_scheme_id: &str, ts_scheme_id: &str) -> Result<Option<TimestampToken>> {
        let vc = self.vc_for_use(vc_scheme_id)?;
        Ok(self.es.renew_ts(vc_scheme_id, &vc.to_value(), ts_scheme_id)?)
    }

    /// Recommits every file together with its evidence under a new
    /// commitment scheme.
    pub fn renew_com(&mut self, vc_scheme_id: &str, ts_scheme_id: &str) -> Result<TimestampToken> {
        let vc = self.vc_for_use(vc_scheme_id)?;
        let names = self.es.names()?;
        if names.is_empty() {
            return Err(ClientError::Empty);
        }
        if names.len() > vc.max_len {
            return Err(ClientError::BatchTooLarge {
                n: names.len(),
                max: vc.max_len,
            });
        }
        let (elements, lengths) = self.renewal_vector(&names)?;
        let (c, tree) = vc.commit_with(self.exec, &elements, &mut self.rng)?;
        // openings first: the evidence service only learns of the renewal
        // once every shareholder write went through
        for (i, name) in names.iter().enumerate() {
            let d = vc.open(&tree, i)?;
            self.sh.store(&decom_key(name, lengths[i]), &decom_value(i as u64, &d), true)?;
        }
        let positions: Vec<(String, u64)> = names.iter().cloned().zip(0u64..).collect();
        Ok(self.es.add_com_renew(vc_scheme_id, &c, &positions, ts_scheme_id)?)
    }

    /// Vector elements for a commitment renewal, plus each name's current
    /// evidence length (the index its new opening is stored under).
    fn renewal_vector(&mut self, names: &[String]) -> Result<(Vec<CanonicalValue>, Vec<usize>)> {
        let mut elements = Vec::with_capacity(names.len());
        let mut lengths = Vec::with_capacity(names.len());
        for name in names {
            let f = self.retrieve(name)?;
            elements.push(verify::renewal_element(&f.dat, &f.sig_scheme_id, &f.s.to_value(), &f.entries));
            lengths.push(f.entries.len());
        }
        Ok((elements, lengths))
    }

    pub fn renew_shares(&mut self, central: bool) -> Result<u64> {
        Ok(if central {
            self.sh.reshare_central()?
        } else {
            self.sh.reshare()?
        })
    }

    /// Moves every stored item to `target` and continues with it.
    pub fn renew_sharing(&mut self, mut target: ShareCluster) -> Result<usize> {
        let moved = self.sh.migrate_to(&mut target)?;
        self.sh = target;
        Ok(moved)
    }

    pub fn retrieve(&mut self, name: &str) -> Result<RetrievedFile> {
        let mut entries = self.es.get_evidence(name)?;
        for (i, e) in entries.iter_mut().enumerate() {
            if let EvidenceEntry::Com { d, .. } = e {
                let v = self.sh.retrieve(&decom_key(name, i))?;
                let items = v.as_tuple_of(2).map_err(|_| ClientError::Corrupt(name.to_owned()))?;
                *d = Some(Opening::from_value(&items[1])?);
            }
        }
        let triple = self.sh.retrieve(&data_key(name))?;
        let items = triple.as_tuple_of(3).map_err(|_| ClientError::Corrupt(name.to_owned()))?;
        Ok(RetrievedFile {
            dat: items[0].as_bytes()?.to_vec(),
            sig_scheme_id: items[1].as_str()?.to_owned(),
            s: Signature::from_value(&items[2])?,
            entries,
        })
    }

    pub fn signer_mut(&mut self, id: &str) -> Option<&mut SignatureKeyPair> {
        self.signers.get_mut(id)
    }

    /// Draws fresh randomness from the archive's generator.
    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Per-item operation, one commitment and one token per file, for
/// comparison runs.
impl Archive<EvidenceService> {
    pub fn renew_ts_each(&mut self, vc_scheme_id: &str, ts_scheme_id: &str) -> Result<Vec<TimestampToken>> {
        let vc = self.vc_for_use(vc_scheme_id)?;
        Ok(self.es.renew_ts_each(vc_scheme_id, &vc, ts_scheme_id)?)
    }

    pub fn renew_com_each(&mut self, vc_scheme_id: &str, ts_scheme_id: &str) -> Result<Vec<TimestampToken>> {
        let vc = self.vc_for_use(vc_scheme_id)?;
        let names = self.es.names()?;
        if names.is_empty() {
            return Err(ClientError::Empty);
        }
        let mut tokens = Vec::with_capacity(names.len());
        for name in &names {
            let (elements, lengths) = self.renewal_vector(std::slice::from_ref(name))?;
            let (c, tree) = vc.commit_with(self.exec, &elements, &mut self.rng)?;
            let d = vc.open(&tree, 0)?;
            self.sh.store(&decom_key(name, lengths[0]), &decom_value(0, &d), true)?;
            tokens.push(self.es.add_com_renew_single(name, vc_scheme_id, &c, 0, ts_scheme_id)?);
        }
        Ok(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestamping::TimestampService;

    struct Fixture {
        archive: Archive<EvidenceService>,
        files: Vec<(String, Vec<u8>)>,
    }

    // ts1 valid [0, 30), ts2 [20, 100); vc1 [0, 40), vc2 [30, 100)
    fn fixture() -> Fixture {
        let clock = LogicalClock::new(1);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut pki = PkiRegistry::new();
        let mut es = EvidenceService::new(5).record_transcript();
        for (id, from, to) in [("ts1", 0, 30), ("ts2", 20, 100)] {
            let ts = TimestampService::setup_registered(id, "ed25519", from, to, clock.clone(), &mut pki, &mut rng).unwrap();
            es.attach_tsa(ts).unwrap();
        }
        let sh = ShareCluster::in_memory(3, 2, 9).unwrap();
        let mut archive = Archive::init(sh, es, pki, clock, 3, false).unwrap();
        let key = SignatureKeyPair::setup("sig1", "ed25519", archive.rng()).unwrap();
        archive.add_signer(key, 0, 100).unwrap();
        archive.add_vc("vc1", "merkle-sha256", 4, 0, 40).unwrap();
        archive.add_vc("vc2", "merkle-sha256", 4, 30, 100).unwrap();
        let files = (0..3)
            .map(|i| (format!("f{i}"), format!("secret payload {i}").into_bytes()))
            .collect();
        Fixture { archive, files }
    }

    #[test]
    fn store_writes_data_and_openings() {
        let mut f = fixture();
        f.archive.store(&f.files, "sig1", "vc1", "ts1").unwrap();
        let mut names = f.archive.sharing().names().unwrap();
        names.sort();
        assert_eq!(names.len(), 6);
        assert!(names.contains(&"data/f1".to_string()));
        assert!(names.contains(&"decom/f2/0".to_string()));
        assert!(matches!(
            f.archive.store(&f.files[..1], "sig1", "vc1", "ts1"),
            Err(ClientError::DuplicateName(_))
        ));
    }

    #[test]
    fn store_rejects_bad_batches() {
        let mut f = fixture();
        assert_eq!(f.archive.store(&[], "sig1", "vc1", "ts1").unwrap_err(), ClientError::EmptyBatch);
        let many: Vec<_> = (0..5).map(|i| (format!("g{i}"), vec![i])).collect();
        assert!(matches!(
            f.archive.store(&many, "sig1", "vc1", "ts1"),
            Err(ClientError::BatchTooLarge { n: 5, max: 4 })
        ));
        let dup = vec![("a".to_string(), vec![1]), ("a".to_string(), vec![2])];
        assert!(matches!(f.archive.store(&dup, "sig1", "vc1", "ts1"), Err(ClientError::DuplicateName(_))));
        // vc2 is not yet valid at t=1
        assert!(matches!(
            f.archive.store(&f.files, "sig1", "vc2", "ts1"),
            Err(ClientError::SchemeNotValid { .. })
        ));
        assert!(f.archive.sharing().names().unwrap().is_empty());
    }

    #[test]
    fn init_refuses_existing_state() {
        let mut f = fixture();
        f.archive.store(&f.files, "sig1", "vc1", "ts1").unwrap();
        let Archive { pki, clock, sh, es, .. } = f.archive;
        assert!(matches!(
            Archive::init(sh, es, pki.clone(), clock.clone(), 0, false),
            Err(ClientError::NotEmpty)
        ));
    }

    #[test]
    fn renewal_lifecycle_verifies() {
        let mut f = fixture();
        let r = f.archive.store(&f.files, "sig1", "vc1", "ts1").unwrap();
        let t_store = r.token.t;
        f.archive.clock.advance_to(25);
        assert!(f.archive.renew_ts("vc1", "ts2").unwrap().is_some());
        f.archive.clock.advance_to(35);
        f.archive.renew_com("vc2", "ts2").unwrap();
        f.archive.clock.advance_to(45);
        f.archive.renew_ts("vc2", "ts2").unwrap();
        f.archive.renew_shares(false).unwrap();
        f.archive.renew_shares(true).unwrap();

        let pki = f.archive.pki.clone();
        for (name, dat) in &f.files {
            let file = f.archive.retrieve(name).unwrap();
            assert_eq!(&file.dat, dat);
            assert_eq!(file.entries.len(), 4);
            assert!(file.entries[0].is_com() && file.entries[2].is_com());
            assert_eq!(verify_detailed(&pki, 60, dat, t_store, &file), Ok(()));
            // ts1 expired at 30, vc1 at 40: both were superseded in time
            assert!(verify(&pki, 99, dat, t_store, &file));
            assert!(!verify(&pki, 100, dat, t_store, &file));
            assert!(!verify(&pki, 60, b"forged", t_store, &file));
            assert!(!verify(&pki, 60, dat, t_store + 1, &file));
            let mut short = file.clone();
            short.entries.truncate(2);
            assert_eq!(
                verify_detailed(&pki, 60, dat, t_store, &short),
                Err(VerifyFailure::Commitment { entry: 0 })
            );
        }
    }

    #[test]
    fn migration_keeps_files() {
        let mut f = fixture();
        f.archive.store(&f.files, "sig1", "vc1", "ts1").unwrap();
        let moved = f.archive.renew_sharing(ShareCluster::in_memory(5, 3, 77).unwrap()).unwrap();
        assert_eq!(moved, 6);
        assert_eq!(f.archive.sharing().policy().n, 5);
        let file = f.archive.retrieve("f0").unwrap();
        assert!(verify(&f.archive.pki, 10, &f.files[0].1, 1, &file));
    }

    #[test]
    fn evidence_service_sees_no_plaintext() {
        let mut f = fixture();
        f.archive.store(&f.files, "sig1", "vc1", "ts1").unwrap();
        f.archive.clock.advance_to(35);
        f.archive.renew_com("vc2", "ts2").unwrap();
        let seen: Vec<u8> = f
            .archive
            .evidence_ref()
            .transcript()
            .iter()
            .flat_map(|v| v.encode().unwrap())
            .collect();
        for (_, dat) in &f.files {
            assert!(!seen.windows(dat.len()).any(|w| w == dat.as_slice()));
        }
    }

    #[test]
    fn per_item_mode_verifies() {
        let mut f = fixture();
        for file in &f.files {
            f.archive.store(std::slice::from_ref(file), "sig1", "vc1", "ts1").unwrap();
        }
        f.archive.clock.advance_to(25);
        assert_eq!(f.archive.renew_ts_each("vc1", "ts2").unwrap().len(), 3);
        f.archive.clock.advance_to(35);
        assert_eq!(f.archive.renew_com_each("vc2", "ts2").unwrap().len(), 3);
        f.archive.clock.advance_to(45);
        assert_eq!(f.archive.renew_ts_each("vc2", "ts2").unwrap().len(), 3);
        assert_eq!(f.archive.evidence_ref().stamps(), 12);
        let pki = f.archive.pki.clone();
        for (name, dat) in &f.files {
            let file = f.archive.retrieve(name).unwrap();
            assert_eq!(file.entries.len(), 4);
            assert!(verify(&pki, 99, dat, 1, &file));
        }
    }
}
