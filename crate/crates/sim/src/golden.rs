// SPDX-License-Identifier: Apache-2.0

//! Fixed, fully seeded scenarios: the golden evidence trace used for
//! regression files and tamper tests, and the skipped-renewal scenario.
//!
//! Golden trace timeline (three files):
//!
//! | t | event | schemes |
//! |---|---|---|
//! | 1 | store | sig-g, com-g1, tsa-g1 |
//! | 10 | timestamp renewal | rvc-g, tsa-g1 |
//! | 25 | timestamp renewal | rvc-g, tsa-g2 |
//! | 35 | commitment renewal | com-g2, tsa-g2 |
//! | 50 | verification | tsa-g1 broke at 30, com-g1 at 40 |

use std::collections::BTreeMap;

use elsa_core::client::bundle::EvidenceBundle;
use elsa_core::client::{Archive, ClientError, RetrievedFile};
use elsa_core::encoding::{LogicalClock, Time};
use elsa_core::evidence::EvidenceService;
use elsa_core::par::Exec;
use elsa_core::sharing::ShareCluster;
use elsa_core::sigs::{PkiRegistry, SignatureKeyPair};
use elsa_core::timestamping::TimestampService;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub const GOLDEN_SEED: u64 = 0x454c_5341;
pub const T_STORE: Time = 1;
pub const T_VERIFY: Time = 50;

#[derive(Debug, Clone)]
pub struct GoldenTrace {
    pub pki: PkiRegistry,
    pub files: Vec<(String, Vec<u8>)>,
    pub retrieved: Vec<RetrievedFile>,
    pub t_store: Time,
    pub t_verify: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenMeta {
    pub names: Vec<String>,
    pub t_store: Time,
    pub t_verify: Time,
}

pub fn golden_files() -> Vec<(String, Vec<u8>)> {
    [
        ("doc-a", "ledger page 1: opening balance 1000"),
        ("doc-b", "contract draft, clause 7 revised"),
        ("doc-c", "patient record 0042"),
    ]
    .into_iter()
    .map(|(n, d)| (n.to_owned(), d.as_bytes().to_vec()))
    .collect()
}

/// An archive with sig-g, tsa-g1 [0,30), tsa-g2 [20,100), com-g1 [0,40),
/// com-g2 [30,100) and rvc-g [0,100).
fn archive(seed: u64, exec: Exec) -> Result<(Archive<EvidenceService>, LogicalClock), ClientError> {
    let clock = LogicalClock::new(0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pki = PkiRegistry::new();
    let mut es = EvidenceService::new(seed ^ 1).with_exec(exec);
    for (id, desc, from, to) in [("tsa-g1", "ed25519", 0, 30), ("tsa-g2", "mss-sha256-h4", 20, 100)] {
        let ts = TimestampService::setup_registered(id, desc, from, to, clock.clone(), &mut pki, &mut rng)
            .map_err(|e| ClientError::Corrupt(e.to_string()))?;
        es.attach_tsa(ts)?;
    }
    let sh = ShareCluster::in_memory(3, 2, seed ^ 2)?;
    let mut a = Archive::init(sh, es, pki, clock.clone(), seed ^ 3, false)?.with_exec(exec);
    let key = SignatureKeyPair::setup("sig-g", "ed25519", a.rng())?;
    a.add_signer(key, 0, 100)?;
    a.add_vc("com-g1", "hiding-hm256-sha256", 4, 0, 40)?;
    a.add_vc("com-g2", "hiding-hm256-sha256", 4, 30, 100)?;
    a.add_vc("rvc-g", "merkle-sha256", 4, 0, 100)?;
    Ok((a, clock))
}

pub fn golden_trace(exec: Exec) -> Result<GoldenTrace, ClientError> {
    let (mut a, clock) = archive(GOLDEN_SEED, exec)?;
    let files = golden_files();
    clock.advance_to(T_STORE);
    a.store(&files, "sig-g", "com-g1", "tsa-g1")?;
    clock.advance_to(10);
    a.renew_ts("rvc-g", "tsa-g1")?;
    clock.advance_to(25);
    a.renew_ts("rvc-g", "tsa-g2")?;
    clock.advance_to(35);
    a.renew_com("com-g2", "tsa-g2")?;
    clock.advance_to(T_VERIFY);
    let retrieved = files
        .iter()
        .map(|(n, _)| a.retrieve(n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GoldenTrace {
        pki: a.pki.clone(),
        files,
        retrieved,
        t_store: T_STORE,
        t_verify: T_VERIFY,
    })
}

impl GoldenTrace {
    /// File name to content: `pki.json`, `meta.json`, and per document the
    /// data and its `.evidence` bundle.
    pub fn exports(&self) -> Result<BTreeMap<String, Vec<u8>>, ClientError> {
        let mut out = BTreeMap::new();
        out.insert("pki.json".to_owned(), self.pki.to_json().into_bytes());
        let meta = GoldenMeta {
            names: self.files.iter().map(|(n, _)| n.clone()).collect(),
            t_store: self.t_store,
            t_verify: self.t_verify,
        };
        out.insert(
            "meta.json".to_owned(),
            serde_json::to_string_pretty(&meta).expect("plain data").into_bytes(),
        );
        for ((name, dat), f) in self.files.iter().zip(&self.retrieved) {
            out.insert(name.clone(), dat.clone());
            let bundle = EvidenceBundle::from_retrieved(f)
                .to_bytes()
                .map_err(|e| ClientError::Corrupt(e.to_string()))?;
            out.insert(format!("{name}.evidence"), bundle);
        }
        Ok(out)
    }
}

/// Verification outcomes after the point where a renewal was (or was not)
/// skipped.
#[derive(Debug, Clone)]
pub struct NecessityOutcome {
    /// (time, file index, verified)
    pub checks: Vec<(Time, usize, bool)>,
    /// Verification at t=20, before any scheme broke.
    pub early: Vec<bool>,
}

/// Timestamp renewals at 10, 25, 45, 65 and 85 and a commitment renewal at
/// 38; `skip` drops the timestamp renewal at 25,
/// so the chain's next token after tsa-g1 arrives only at 45, past
/// tsa-g1's break at 30. Every file is verified after each later renewal
/// and at 99.
pub fn renewal_necessity(skip: bool) -> Result<NecessityOutcome, ClientError> {
    let (mut a, clock) = archive(GOLDEN_SEED ^ 0x5eed, Exec::default())?;
    let files = golden_files();
    clock.advance_to(T_STORE);
    a.store(&files, "sig-g", "com-g1", "tsa-g1")?;
    clock.advance_to(10);
    a.renew_ts("rvc-g", "tsa-g1")?;
    let verify_all = |a: &mut Archive<EvidenceService>, t: Time| -> Result<Vec<bool>, ClientError> {
        files
            .iter()
            .map(|(n, d)| {
                let f = a.retrieve(n)?;
                Ok(elsa_core::client::verify(&a.pki, t, d, T_STORE, &f))
            })
            .collect()
    };
    clock.advance_to(20);
    let early = verify_all(&mut a, 20)?;
    let mut checks = Vec::new();
    // com-g1 breaks at 40, so the commitment is renewed at 38
    let mut plan: Vec<(Time, bool)> = vec![(25, false), (38, true), (45, false), (65, false), (85, false)];
    if skip {
        plan.remove(0);
    }
    for (t, com) in plan {
        clock.advance_to(t);
        if com {
            a.renew_com("com-g2", "tsa-g2")?;
        } else {
            a.renew_ts("rvc-g", "tsa-g2")?;
        }
        if t > 30 {
            for (i, ok) in verify_all(&mut a, t)?.into_iter().enumerate() {
                checks.push((t, i, ok));
            }
        }
    }
    clock.advance_to(99);
    for (i, ok) in verify_all(&mut a, 99)?.into_iter().enumerate() {
        checks.push((99, i, ok));
    }
    Ok(NecessityOutcome { checks, early })
}
