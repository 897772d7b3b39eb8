// SPDX-License-Identifier: Apache-2.0

//! Drives an archive through a [`Schedule`] on the logical clock, in batched
//! mode or in the per-item baseline, and measures the result.

use std::collections::BTreeMap;
use std::time::Instant;

use elsa_core::client::{self, Archive, ClientError};
use elsa_core::encoding::LogicalClock;
use elsa_core::evidence::EvidenceService;
use elsa_core::par::Exec;
use elsa_core::sharing::ShareCluster;
use elsa_core::sigs::{PkiRegistry, SigAlgorithm, SignatureKeyPair};
use elsa_core::timestamping::{TimestampService, TsError};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::MetricsReport;
use crate::schedule::{height_for, EventKind, Role, Schedule, ScheduleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One commitment and one token per batch and per renewal.
    Elsa,
    /// One commitment and one token per item, as when running an
    /// independent archive for every item.
    Baseline,
}

impl Mode {
    pub fn per_item(self) -> bool {
        self == Mode::Baseline
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Elsa => "elsa",
            Mode::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Ts(#[from] TsError),
}

pub fn item_name(epoch: u64, i: usize) -> String {
    format!("e{epoch:03}-i{i:03}")
}

/// Deterministic item content.
pub fn item_data(seed: u64, epoch: u64, i: usize, size: usize) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (epoch << 20) ^ i as u64);
    let mut v = vec![0u8; size];
    rng.fill_bytes(&mut v);
    v
}

/// Registers every scheme in the table: signers and commitment parameters
/// with the archive, timestamp keys with the evidence service.
fn provision(
    schedule: &Schedule,
    tokens: &BTreeMap<String, u64>,
    clock: &LogicalClock,
    rng: &mut ChaCha20Rng,
) -> Result<(PkiRegistry, EvidenceService, Vec<(SignatureKeyPair, u64, u64)>), SimError> {
    let mut pki = PkiRegistry::new();
    let mut es = EvidenceService::new(rng.next_u64());
    let mut signers = Vec::new();
    for s in &schedule.schemes {
        let (from, to) = schedule.window(s);
        match s.role {
            Role::Timestamp => {
                let mut desc = s.descriptor.clone();
                if desc.starts_with("mss-") && SigAlgorithm::parse(&desc).is_err() {
                    let h = height_for(tokens.get(&s.id).copied().unwrap_or(0));
                    desc = format!("{desc}-h{h}");
                }
                let ts = TimestampService::setup_registered(&s.id, &desc, from, to, clock.clone(), &mut pki, rng)?;
                es.attach_tsa(ts).map_err(ClientError::from)?;
            }
            Role::Signature => {
                let key = SignatureKeyPair::setup(&s.id, &s.descriptor, rng).map_err(ClientError::from)?;
                signers.push((key, from, to));
            }
            Role::Commitment | Role::RenewalCommitment => {}
        }
    }
    Ok((pki, es, signers))
}

pub fn simulate(schedule: &Schedule, mode: Mode, seed: u64, exec: Exec) -> Result<MetricsReport, SimError> {
    let started = Instant::now();
    let events = schedule.plan()?;
    let tokens = schedule.tokens_per_tsa(&events, mode.per_item());
    let clock = LogicalClock::new(0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (pki, es, signers) = provision(schedule, &tokens, &clock, &mut rng)?;
    let es = es.with_exec(exec);
    let sh = ShareCluster::in_memory(schedule.policy.n, schedule.policy.t, rng.next_u64())
        .map_err(ClientError::from)?;
    let mut archive = Archive::init(sh, es, pki, clock.clone(), rng.next_u64(), false)?.with_exec(exec);
    for (key, from, to) in signers {
        archive.add_signer(key, from, to)?;
    }
    // enough room for one renewal vector over everything ever stored
    let max_len = (schedule.horizon as usize * schedule.items_per_epoch).max(1);
    for s in &schedule.schemes {
        if matches!(s.role, Role::Commitment | Role::RenewalCommitment) {
            let (from, to) = schedule.window(s);
            archive.add_vc(&s.id, &s.descriptor, max_len, from, to)?;
        }
    }

    let mut report = MetricsReport::new(schedule, mode, seed);
    report.expected_timestamps = schedule.expected_timestamps(mode.per_item());
    let mut phases: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut t_store = BTreeMap::new();
    for ev in &events {
        clock.advance_to(ev.t);
        let t0 = Instant::now();
        let ts = ev.ts.as_deref().unwrap_or_default();
        let vc = ev.vc.as_deref().unwrap_or_default();
        let phase = match &ev.kind {
            EventKind::Store { epoch } => {
                let files: Vec<(String, Vec<u8>)> = (0..schedule.items_per_epoch)
                    .map(|i| (item_name(*epoch, i), item_data(seed, *epoch, i, schedule.item_size)))
                    .collect();
                let sig = ev.sig.as_deref().unwrap_or_default();
                if mode.per_item() {
                    for f in &files {
                        archive.store(std::slice::from_ref(f), sig, vc, ts)?;
                    }
                } else {
                    archive.store(&files, sig, vc, ts)?;
                }
                t_store.insert(*epoch, ev.t);
                report.batches += 1;
                "store"
            }
            EventKind::RenewTs => {
                if mode.per_item() {
                    archive.renew_ts_each(vc, ts)?;
                } else {
                    archive.renew_ts(vc, ts)?;
                }
                report.ts_renewals += 1;
                "renew_ts"
            }
            EventKind::RenewCom => {
                if mode.per_item() {
                    archive.renew_com_each(vc, ts)?;
                } else {
                    archive.renew_com(vc, ts)?;
                }
                report.com_renewals += 1;
                "renew_com"
            }
            EventKind::Reshare => {
                archive.renew_shares(false)?;
                report.reshares += 1;
                "reshare"
            }
            EventKind::Verify { epoch } => {
                // one item from each epoch so far, rotating through the batch
                for past in 0..=*epoch {
                    let i = (*epoch as usize) % schedule.items_per_epoch;
                    let name = item_name(past, i);
                    let file = archive.retrieve(&name)?;
                    let dat = item_data(seed, past, i, schedule.item_size);
                    let ok = file.dat == dat && client::verify(&archive.pki, ev.t, &dat, t_store[&past], &file);
                    if ok {
                        report.verify_pass += 1;
                    } else {
                        log::warn!("verification of {name} failed at t={}", ev.t);
                        report.verify_fail += 1;
                    }
                }
                "verify"
            }
        };
        *phases.entry(phase).or_insert(0.0) += t0.elapsed().as_secs_f64() * 1e3;
    }

    let es = archive.evidence_ref();
    report.timestamps = es.stamps();
    report.tokens_per_tsa = es.tsas().map(|t| (t.scheme_id().to_owned(), t.issued())).collect();
    report.es_list_bytes = es.list_bytes();
    report.es_index_bytes = es.index_bytes();
    report.shareholder_bytes = archive.sharing().stored_bytes().map_err(ClientError::from)?;
    report.phase_ms = phases.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    report.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{PolicySpec, SchemeSpec};

    pub(crate) fn small() -> Schedule {
        let s = |id: &str, role, d: &str| SchemeSpec {
            id: id.into(),
            role,
            descriptor: d.into(),
            from: 0,
            until: None,
        };
        Schedule {
            horizon: 4,
            ticks_per_epoch: 12,
            items_per_epoch: 3,
            item_size: 64,
            ts_renew_period: 1,
            com_renew_period: 2,
            reshare_period: 2,
            policy: PolicySpec { n: 3, t: 2 },
            verify_each_epoch: true,
            schemes: vec![
                s("sig", Role::Signature, "ed25519"),
                s("tsa", Role::Timestamp, "mss-sha256"),
                s("com", Role::Commitment, "hiding-hm256-sha256"),
                s("rvc", Role::RenewalCommitment, "merkle-sha256"),
            ],
        }
    }

    #[test]
    fn both_modes_verify_and_match_closed_form() {
        let s = small();
        for mode in [Mode::Elsa, Mode::Baseline] {
            let r = simulate(&s, mode, 1, Exec::default()).unwrap();
            assert_eq!(r.verify_fail, 0);
            assert_eq!(r.verify_pass, 10);
            assert_eq!(r.timestamps, r.expected_timestamps);
        }
        assert_eq!(s.expected_timestamps(false), 4 + 4 + 2);
        assert_eq!(s.expected_timestamps(true), 3 * (4 + 10 + 2 * 3));
    }

    #[test]
    fn deterministic_counts_and_bytes() {
        let s = small();
        let a = simulate(&s, Mode::Elsa, 9, Exec::Sequential).unwrap();
        let b = simulate(&s, Mode::Elsa, 9, Exec::Parallel).unwrap();
        assert_eq!(a.counts_and_bytes(), b.counts_and_bytes());
    }
}
