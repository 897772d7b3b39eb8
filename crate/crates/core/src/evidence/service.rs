// SPDX-License-Identifier: Apache-2.0

//! In-process evidence service with optional directory persistence:
//! `lists/<id>` holds the canonical encoding of a list, `index` the name
//! table and the renewal set, `tsa.json` the attached timestamp authorities.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::net as wire;
use super::{chain_value, stamp_message, EvidenceApi, EvidenceEntry, EvidenceError, ListEntry, Result};
use crate::encoding::{CanonicalValue, EncodingError, LogicalClock, Time};
use crate::par::Exec;
use crate::sigs::{KeyPairRecord, SignatureKeyPair};
use crate::timestamping::{TimestampService, TimestampToken};
use crate::vector_com::{VcParams, VectorCommitment};

type ListId = usize;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct NameRecord {
    segments: Vec<ListId>,
    /// Position of the name in the commitment opening each segment.
    positions: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TsaRecord {
    key: KeyPairRecord,
    valid_from: Time,
    t_b: Time,
}

#[derive(Debug)]
pub struct EvidenceService {
    lists: Vec<Vec<ListEntry>>,
    index: BTreeMap<String, NameRecord>,
    renew_lists: Vec<ListId>,
    tsas: BTreeMap<String, TimestampService>,
    rng: ChaCha20Rng,
    exec: Exec,
    transcript: Vec<CanonicalValue>,
    record_transcript: bool,
    dir: Option<PathBuf>,
    dirty: BTreeSet<ListId>,
    stamps: u64,
}

impl EvidenceService {
    pub fn new(seed: u64) -> Self {
        EvidenceService {
            lists: Vec::new(),
            index: BTreeMap::new(),
            renew_lists: Vec::new(),
            tsas: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            exec: Exec::default(),
            transcript: Vec::new(),
            record_transcript: false,
            dir: None,
            dirty: BTreeSet::new(),
            stamps: 0,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Keep a copy of every inbound request.
    pub fn record_transcript(mut self) -> Self {
        self.record_transcript = true;
        self
    }

    /// Opens a persistent service, loading whatever the directory holds.
    pub fn open(dir: &Path, seed: u64, clock: LogicalClock) -> Result<Self> {
        fs::create_dir_all(dir.join("lists"))?;
        let mut es = Self::new(seed);
        es.dir = Some(dir.to_path_buf());
        let index_path = dir.join("index");
        if index_path.exists() {
            let v = CanonicalValue::decode(&fs::read(&index_path)?)?;
            let (index, renew, count) = decode_index(&v)?;
            for id in 0..count {
                let v = CanonicalValue::decode(&fs::read(dir.join("lists").join(id.to_string()))?)?;
                let list = v.as_tuple()?.iter().map(ListEntry::from_value).collect::<Result<Vec<_>, _>>()?;
                es.lists.push(list);
            }
            es.index = index;
            es.renew_lists = renew;
        }
        let tsa_path = dir.join("tsa.json");
        if tsa_path.exists() {
            let recs: Vec<TsaRecord> =
                serde_json::from_str(&fs::read_to_string(&tsa_path)?).map_err(|e| EvidenceError::Io(e.to_string()))?;
            for r in recs {
                let key = SignatureKeyPair::from_record(&r.key).map_err(|e| EvidenceError::Io(e.to_string()))?;
                let ts = TimestampService::from_key(key, r.valid_from, r.t_b, clock.clone());
                es.tsas.insert(ts.scheme_id().to_owned(), ts);
            }
        }
        Ok(es)
    }

    pub fn attach_tsa(&mut self, ts: TimestampService) -> Result<()> {
        self.tsas.insert(ts.scheme_id().to_owned(), ts);
        self.flush()
    }

    pub fn tsa(&self, id: &str) -> Option<&TimestampService> {
        self.tsas.get(id)
    }

    pub fn tsas(&self) -> impl Iterator<Item = &TimestampService> {
        self.tsas.values()
    }

    /// Tokens this service obtained from authorities.
    pub fn stamps(&self) -> u64 {
        self.stamps
    }

    pub fn transcript(&self) -> &[CanonicalValue] {
        &self.transcript
    }

    pub fn list_count(&self) -> usize {
        self.lists.len()
    }

    pub fn renew_list_count(&self) -> usize {
        self.renew_lists.len()
    }

    /// Bytes of commitment and timestamp data held in lists.
    pub fn list_bytes(&self) -> u64 {
        self.lists.iter().map(|l| chain_value(l).encoded_len() as u64).sum()
    }

    /// Bytes of the name table.
    pub fn index_bytes(&self) -> u64 {
        encode_index(&self.index, &self.renew_lists, self.lists.len()).encoded_len() as u64
    }

    /// Every name's evidence length.
    pub fn evidence_len(&self, name: &str) -> Option<usize> {
        self.index
            .get(name)
            .map(|r| r.segments.iter().map(|&l| self.lists[l].len()).sum())
    }

    fn note(&mut self, req: CanonicalValue) {
        if self.record_transcript {
            self.transcript.push(req);
        }
    }

    fn stamp(&mut self, ts_scheme_id: &str, m: &CanonicalValue) -> Result<TimestampToken> {
        let ts = self
            .tsas
            .get_mut(ts_scheme_id)
            .ok_or_else(|| EvidenceError::UnknownTsa(ts_scheme_id.to_owned()))?;
        let tok = ts.stamp(m)?;
        self.stamps += 1;
        Ok(tok)
    }

    fn new_list(&mut self, first: ListEntry) -> ListId {
        self.lists.push(vec![first]);
        let id = self.lists.len() - 1;
        self.dirty.insert(id);
        id
    }

    fn flush(&mut self) -> Result<()> {
        let Some(dir) = self.dir.clone() else {
            self.dirty.clear();
            return Ok(());
        };
        for id in std::mem::take(&mut self.dirty) {
            write_atomic(&dir.join("lists").join(id.to_string()), &chain_value(&self.lists[id]).encode()?)?;
        }
        write_atomic(
            &dir.join("index"),
            &encode_index(&self.index, &self.renew_lists, self.lists.len()).encode()?,
        )?;
        let recs: Vec<TsaRecord> = self
            .tsas
            .values()
            .map(|t| TsaRecord {
                key: t.key().to_record(),
                valid_from: t.instance().valid_from,
                t_b: t.instance().t_b,
            })
            .collect();
        write_atomic(
            &dir.join("tsa.json"),
            serde_json::to_string_pretty(&recs).expect("plain data").as_bytes(),
        )?;
        Ok(())
    }

    fn renew_set(&mut self, targets: &[ListId], vc_scheme_id: &str, params: &VcParams, ts_scheme_id: &str) -> Result<TimestampToken> {
        let elements: Vec<CanonicalValue> = targets.iter().map(|&l| chain_value(&self.lists[l])).collect();
        let (c, tree) = params.commit_with(self.exec, &elements, &mut self.rng)?;
        let token = self.stamp(ts_scheme_id, &stamp_message(vc_scheme_id, &c))?;
        for (i, &l) in targets.iter().enumerate() {
            let d = params.open(&tree, i)?;
            self.lists[l].push(ListEntry::Renew {
                vc_scheme_id: vc_scheme_id.to_owned(),
                c: c.clone(),
                d,
                position: i as u64,
                token: token.clone(),
            });
            self.dirty.insert(l);
        }
        Ok(token)
    }

    /// Timestamp renewal with one commitment and one token per list, as a
    /// per-item archive does it.
    pub fn renew_ts_each(&mut self, vc_scheme_id: &str, params: &VcParams, ts_scheme_id: &str) -> Result<Vec<TimestampToken>> {
        self.note(wire::renew_ts_request(vc_scheme_id, &params.to_value(), ts_scheme_id));
        let mut out = Vec::with_capacity(self.renew_lists.len());
        for l in self.renew_lists.clone() {
            out.push(self.renew_set(&[l], vc_scheme_id, params, ts_scheme_id)?);
        }
        self.flush()?;
        Ok(out)
    }

    /// Commitment renewal for a single name, on its own fresh list. The new
    /// list replaces the name's previous lists in the renewal set.
    pub fn add_com_renew_single(
        &mut self,
        name: &str,
        vc_scheme_id: &str,
        c: &VectorCommitment,
        position: u64,
        ts_scheme_id: &str,
    ) -> Result<TimestampToken> {
        self.note(wire::add_com_renew_request(
            vc_scheme_id,
            c,
            &[(name.to_owned(), position)],
            ts_scheme_id,
        ));
        if !self.index.contains_key(name) {
            return Err(EvidenceError::UnknownName(name.to_owned()));
        }
        let token = self.stamp(ts_scheme_id, &stamp_message(vc_scheme_id, c))?;
        let l = self.new_list(ListEntry::Com {
            vc_scheme_id: vc_scheme_id.to_owned(),
            c: c.clone(),
            token: token.clone(),
        });
        let rec = self.index.get_mut(name).expect("checked");
        let old: BTreeSet<ListId> = rec.segments.iter().copied().collect();
        rec.segments.push(l);
        rec.positions.push(position);
        self.renew_lists.retain(|x| !old.contains(x));
        self.renew_lists.push(l);
        self.flush()?;
        Ok(token)
    }

    fn renew_ts_inner(&mut self, vc_scheme_id: &str, params: &VcParams, ts_scheme_id: &str) -> Result<Option<TimestampToken>> {
        if self.renew_lists.is_empty() {
            log::info!("timestamp renewal requested with nothing to renew");
            return Ok(None);
        }
        let targets = self.renew_lists.clone();
        let tok = self.renew_set(&targets, vc_scheme_id, params, ts_scheme_id)?;
        self.flush()?;
        Ok(Some(tok))
    }
}

impl EvidenceApi for EvidenceService {
    fn add_com(&mut self, names: &[String], vc_scheme_id: &str, c: &VectorCommitment, ts_scheme_id: &str) -> Result<TimestampToken> {
        self.note(wire::add_com_request(names, vc_scheme_id, c, ts_scheme_id));
        if names.is_empty() {
            return Err(EvidenceError::EmptyBatch);
        }
        let mut seen = BTreeSet::new();
        for n in names {
            if self.index.contains_key(n) || !seen.insert(n) {
                return Err(EvidenceError::DuplicateName(n.clone()));
            }
        }
        let token = self.stamp(ts_scheme_id, &stamp_message(vc_scheme_id, c))?;
        let l = self.new_list(ListEntry::Com {
            vc_scheme_id: vc_scheme_id.to_owned(),
            c: c.clone(),
            token: token.clone(),
        });
        for (i, n) in names.iter().enumerate() {
            self.index.insert(
                n.clone(),
                NameRecord {
                    segments: vec![l],
                    positions: vec![i as u64],
                },
            );
        }
        self.renew_lists.push(l);
        self.flush()?;
        Ok(token)
    }

    fn renew_ts(&mut self, vc_scheme_id: &str, vc_params: &CanonicalValue, ts_scheme_id: &str) -> Result<Option<TimestampToken>> {
        self.note(wire::renew_ts_request(vc_scheme_id, vc_params, ts_scheme_id));
        let params = VcParams::from_value(vc_params)?;
        self.renew_ts_inner(vc_scheme_id, &params, ts_scheme_id)
    }

    fn add_com_renew(
        &mut self,
        vc_scheme_id: &str,
        c: &VectorCommitment,
        positions: &[(String, u64)],
        ts_scheme_id: &str,
    ) -> Result<TimestampToken> {
        self.note(wire::add_com_renew_request(vc_scheme_id, c, positions, ts_scheme_id));
        let given: BTreeMap<&String, u64> = positions.iter().map(|(n, p)| (n, *p)).collect();
        if let Some(n) = self.index.keys().find(|n| !given.contains_key(n)) {
            return Err(EvidenceError::PositionMissing(n.clone()));
        }
        if let Some(n) = given.keys().find(|n| !self.index.contains_key(**n)) {
            return Err(EvidenceError::PositionUnexpected((*n).clone()));
        }
        let token = self.stamp(ts_scheme_id, &stamp_message(vc_scheme_id, c))?;
        let l = self.new_list(ListEntry::Com {
            vc_scheme_id: vc_scheme_id.to_owned(),
            c: c.clone(),
            token: token.clone(),
        });
        for (name, rec) in self.index.iter_mut() {
            rec.segments.push(l);
            rec.positions.push(given[name]);
        }
        self.renew_lists = vec![l];
        self.flush()?;
        Ok(token)
    }

    fn get_evidence(&mut self, name: &str) -> Result<Vec<EvidenceEntry>> {
        self.note(wire::get_evidence_request(name));
        let rec = self
            .index
            .get(name)
            .ok_or_else(|| EvidenceError::UnknownName(name.to_owned()))?;
        let mut out = Vec::new();
        for (&l, &pos) in rec.segments.iter().zip(&rec.positions) {
            out.extend(self.lists[l].iter().map(|e| EvidenceEntry::from_list_entry(e, pos)));
        }
        Ok(out)
    }

    fn names(&mut self) -> Result<Vec<String>> {
        Ok(self.index.keys().cloned().collect())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `Tuple[Tuple[Tuple[name, Tuple[list ids], Tuple[positions]]...], Tuple[renew ids], UInt(list count)]`
fn encode_index(index: &BTreeMap<String, NameRecord>, renew: &[ListId], count: usize) -> CanonicalValue {
    let uints = |xs: &mut dyn Iterator<Item = u64>| CanonicalValue::tuple(xs.map(CanonicalValue::UInt));
    CanonicalValue::tuple([
        CanonicalValue::tuple(index.iter().map(|(n, r)| {
            CanonicalValue::tuple([
                CanonicalValue::str(n),
                uints(&mut r.segments.iter().map(|&x| x as u64)),
                uints(&mut r.positions.iter().copied()),
            ])
        })),
        uints(&mut renew.iter().map(|&x| x as u64)),
        CanonicalValue::UInt(count as u64),
    ])
}

type IndexParts = (BTreeMap<String, NameRecord>, Vec<ListId>, usize);

fn decode_index(v: &CanonicalValue) -> Result<IndexParts, EncodingError> {
    let items = v.as_tuple_of(3)?;
    let count = items[2].as_uint()? as usize;
    let ids = |v: &CanonicalValue| -> Result<Vec<usize>, EncodingError> {
        v.as_tuple()?
            .iter()
            .map(|x| {
                let x = x.as_uint()? as usize;
                if x >= count {
                    return Err(EncodingError::Shape("list id below list count"));
                }
                Ok(x)
            })
            .collect()
    };
    let mut index = BTreeMap::new();
    for row in items[0].as_tuple()? {
        let row = row.as_tuple_of(3)?;
        let rec = NameRecord {
            segments: ids(&row[1])?,
            positions: row[2].as_tuple()?.iter().map(|p| p.as_uint()).collect::<Result<_, _>>()?,
        };
        if rec.segments.len() != rec.positions.len() || rec.segments.is_empty() {
            return Err(EncodingError::Shape("one position per segment"));
        }
        index.insert(row[0].as_str()?.to_owned(), rec);
    }
    Ok((index, ids(&items[1])?, count))
}
