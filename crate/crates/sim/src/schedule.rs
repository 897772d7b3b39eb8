// SPDX-License-Identifier: Apache-2.0

//! Simulation schedules: a compressed timeline of epochs, each `ticks_per_epoch`
//! logical ticks long, and a table of scheme instances with validity windows.
//!
//! Within epoch `e` (base tick `b = e * ticks_per_epoch`) events happen in a
//! fixed order: store at `b+1`, timestamp renewal at `b+4`, commitment
//! renewal at `b+7`, reshare at `b+8`, retrieval and verification at `b+10`.
//! Periodic events fire in the last epoch of each period.

use std::collections::BTreeMap;

use elsa_core::encoding::Time;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STORE_OFFSET: Time = 1;
pub const RENEW_TS_OFFSET: Time = 4;
pub const RENEW_COM_OFFSET: Time = 7;
pub const RESHARE_OFFSET: Time = 8;
pub const VERIFY_OFFSET: Time = 10;
pub const MIN_TICKS_PER_EPOCH: Time = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("no {role} scheme valid at tick {t}")]
    NoScheme { role: Role, t: Time },
    #[error("scheme `{id}` expires at tick {t_b} before it is superseded (next renewal at {next})")]
    NotRenewed { id: String, t_b: Time, next: Time },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// Signs data items.
    Signature,
    Timestamp,
    /// Commits data items; should be hiding.
    Commitment,
    /// Commits evidence lists during timestamp renewal.
    RenewalCommitment,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Signature => "signature",
            Role::Timestamp => "timestamp",
            Role::Commitment => "commitment",
            Role::RenewalCommitment => "renewal-commitment",
        })
    }
}

/// One row of the rotation table. Windows are in epochs; `until` is the
/// epoch at which the scheme breaks (`None`: never within the run).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub id: String,
    pub role: Role,
    /// For MSS timestamp keys the height may be omitted (`mss-sha256`); it
    /// is then sized to the number of tokens the schedule needs.
    pub descriptor: String,
    pub from: u64,
    #[serde(default)]
    pub until: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub n: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub horizon: u64,
    pub ticks_per_epoch: u64,
    pub items_per_epoch: usize,
    pub item_size: usize,
    pub ts_renew_period: u64,
    pub com_renew_period: u64,
    pub reshare_period: u64,
    pub policy: PolicySpec,
    /// Retrieve and verify one item of every past epoch at each epoch end.
    #[serde(default = "yes")]
    pub verify_each_epoch: bool,
    pub schemes: Vec<SchemeSpec>,
}

fn yes() -> bool {
    true
}

impl Default for Schedule {
    fn default() -> Self {
        let s = |id: &str, role, descriptor: &str, from, until| SchemeSpec {
            id: id.into(),
            role,
            descriptor: descriptor.into(),
            from,
            until,
        };
        Schedule {
            horizon: 20,
            ticks_per_epoch: 12,
            items_per_epoch: 12,
            item_size: 1024,
            ts_renew_period: 2,
            com_renew_period: 10,
            reshare_period: 5,
            policy: PolicySpec { n: 4, t: 3 },
            verify_each_epoch: true,
            schemes: vec![
                s("sig-1", Role::Signature, "ed25519", 0, Some(11)),
                s("sig-2", Role::Signature, "ed25519", 10, None),
                s("tsa-1", Role::Timestamp, "mss-sha256", 0, Some(9)),
                s("tsa-2", Role::Timestamp, "mss-sha256", 7, Some(17)),
                s("tsa-3", Role::Timestamp, "mss-sha512", 15, None),
                s("com-1", Role::Commitment, "hiding-hm256-sha256", 0, Some(12)),
                s("com-2", Role::Commitment, "hiding-hm512-sha512", 9, None),
                s("rvc-1", Role::RenewalCommitment, "merkle-sha256", 0, Some(12)),
                s("rvc-2", Role::RenewalCommitment, "merkle-sha512", 9, None),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Store { epoch: u64 },
    RenewTs,
    RenewCom,
    Reshare,
    Verify { epoch: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub t: Time,
    pub kind: EventKind,
    /// Scheme ids by role for this event.
    pub sig: Option<String>,
    pub ts: Option<String>,
    pub vc: Option<String>,
}

impl Schedule {
    pub fn end(&self) -> Time {
        self.horizon * self.ticks_per_epoch
    }

    pub fn window(&self, s: &SchemeSpec) -> (Time, Time) {
        (
            s.from * self.ticks_per_epoch,
            s.until.map_or(Time::MAX, |u| u * self.ticks_per_epoch),
        )
    }

    /// The newest scheme of `role` valid at `t`.
    pub fn current(&self, role: Role, t: Time) -> Result<&SchemeSpec, ScheduleError> {
        self.schemes
            .iter()
            .filter(|s| s.role == role)
            .filter(|s| {
                let (from, to) = self.window(s);
                from <= t && t < to
            })
            .max_by_key(|s| s.from)
            .ok_or(ScheduleError::NoScheme { role, t })
    }

    fn check_shape(&self) -> Result<(), ScheduleError> {
        let bad = |m: &str| Err(ScheduleError::Invalid(m.to_owned()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.ticks_per_epoch < MIN_TICKS_PER_EPOCH {
            return bad("ticks_per_epoch must be at least 12");
        }
        if self.items_per_epoch == 0 {
            return bad("items_per_epoch must be positive");
        }
        if self.ts_renew_period == 0 || self.com_renew_period == 0 || self.reshare_period == 0 {
            return bad("periods must be positive");
        }
        if self.policy.t == 0 || self.policy.t > self.policy.n || self.policy.n > 255 {
            return bad("sharing policy needs 1 <= t <= n <= 255");
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.schemes {
            if !ids.insert(&s.id) {
                return Err(ScheduleError::Invalid(format!("duplicate scheme id `{}`", s.id)));
            }
            if s.until.is_some_and(|u| u <= s.from) {
                return Err(ScheduleError::Invalid(format!("scheme `{}` has an empty window", s.id)));
            }
        }
        Ok(())
    }

    /// The full event list, with schemes chosen and the renewal discipline
    /// checked: every timestamp and commitment scheme must be superseded
    /// on each chain it protects before it breaks.
    pub fn plan(&self) -> Result<Vec<Event>, ScheduleError> {
        self.check_shape()?;
        let mut events = Vec::new();
        let pick = |role, t| self.current(role, t).map(|s| Some(s.id.clone()));
        for e in 0..self.horizon {
            let base = e * self.ticks_per_epoch;
            let last_of = |p: u64| (e + 1) % p == 0;
            let t = base + STORE_OFFSET;
            events.push(Event {
                t,
                kind: EventKind::Store { epoch: e },
                sig: pick(Role::Signature, t)?,
                ts: pick(Role::Timestamp, t)?,
                vc: pick(Role::Commitment, t)?,
            });
            if last_of(self.ts_renew_period) {
                let t = base + RENEW_TS_OFFSET;
                events.push(Event {
                    t,
                    kind: EventKind::RenewTs,
                    sig: None,
                    ts: pick(Role::Timestamp, t)?,
                    vc: pick(Role::RenewalCommitment, t)?,
                });
            }
            if last_of(self.com_renew_period) {
                let t = base + RENEW_COM_OFFSET;
                events.push(Event {
                    t,
                    kind: EventKind::RenewCom,
                    sig: None,
                    ts: pick(Role::Timestamp, t)?,
                    vc: pick(Role::Commitment, t)?,
                });
            }
            if last_of(self.reshare_period) {
                events.push(Event {
                    t: base + RESHARE_OFFSET,
                    kind: EventKind::Reshare,
                    sig: None,
                    ts: None,
                    vc: None,
                });
            }
            if self.verify_each_epoch {
                events.push(Event {
                    t: base + VERIFY_OFFSET,
                    kind: EventKind::Verify { epoch: e },
                    sig: None,
                    ts: None,
                    vc: None,
                });
            }
        }
        self.check_renewals(&events)?;
        Ok(events)
    }

    fn check_renewals(&self, events: &[Event]) -> Result<(), ScheduleError> {
        let t_b = |id: &str| {
            let s = self.schemes.iter().find(|s| s.id == id).expect("picked from table");
            self.window(s).1
        };
        let end = self.end();
        let next = |after: Time, f: &dyn Fn(&EventKind) -> bool| {
            events
                .iter()
                .find(|e| e.t > after && f(&e.kind))
                .map_or(end, |e| e.t)
        };
        let any_renewal = |k: &EventKind| matches!(k, EventKind::RenewTs | EventKind::RenewCom);
        let com_renewal = |k: &EventKind| matches!(k, EventKind::RenewCom);
        for ev in events {
            let mut need = Vec::new();
            match ev.kind {
                EventKind::Store { .. } => {
                    need.push((ev.ts.as_deref(), next(ev.t, &any_renewal)));
                    need.push((ev.vc.as_deref(), next(ev.t, &com_renewal)));
                }
                EventKind::RenewTs => {
                    need.push((ev.ts.as_deref(), next(ev.t, &any_renewal)));
                    need.push((ev.vc.as_deref(), next(ev.t, &any_renewal)));
                }
                EventKind::RenewCom => {
                    need.push((ev.ts.as_deref(), next(ev.t, &any_renewal)));
                    need.push((ev.vc.as_deref(), next(ev.t, &com_renewal)));
                }
                _ => {}
            }
            for (id, next) in need {
                let id = id.expect("renewing events carry schemes");
                let tb = t_b(id);
                // the final check happens at `end`; t_b is exclusive
                if next >= tb {
                    return Err(ScheduleError::NotRenewed {
                        id: id.to_owned(),
                        t_b: tb,
                        next,
                    });
                }
            }
        }
        Ok(())
    }

    /// Tokens each timestamp authority issues, per mode.
    pub fn tokens_per_tsa(&self, events: &[Event], per_item: bool) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        let mut stored = 0u64;
        let n = self.items_per_epoch as u64;
        for ev in events {
            let count = match ev.kind {
                EventKind::Store { .. } => {
                    stored += n;
                    if per_item {
                        n
                    } else {
                        1
                    }
                }
                EventKind::RenewTs | EventKind::RenewCom => {
                    if per_item {
                        stored
                    } else {
                        1
                    }
                }
                _ => 0,
            };
            if let Some(ts) = &ev.ts {
                *out.entry(ts.clone()).or_insert(0) += count;
            }
        }
        out
    }

    /// Counts of (batches, ts renewals, com renewals, reshares).
    pub fn event_counts(&self) -> (u64, u64, u64, u64) {
        (
            self.horizon,
            self.horizon / self.ts_renew_period,
            self.horizon / self.com_renew_period,
            self.horizon / self.reshare_period,
        )
    }

    /// Closed-form token count. One token per batch and per renewal in
    /// batched mode; in per-item mode each event stamps every item it
    /// covers, and the k-th renewal of period p covers k*p batches.
    pub fn expected_timestamps(&self, per_item: bool) -> u64 {
        let (b, r, c, _) = self.event_counts();
        if !per_item {
            return b + r + c;
        }
        let n = self.items_per_epoch as u64;
        let tri = |k: u64| k * (k + 1) / 2;
        n * (b + self.ts_renew_period * tri(r) + self.com_renew_period * tri(c))
    }
}

/// MSS height that fits `tokens` signatures.
pub fn height_for(tokens: u64) -> u32 {
    tokens.max(2).next_power_of_two().trailing_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_is_valid() {
        let s = Schedule::default();
        let ev = s.plan().unwrap();
        let count = |f: fn(&EventKind) -> bool| ev.iter().filter(|e| f(&e.kind)).count() as u64;
        assert_eq!(count(|k| matches!(k, EventKind::Store { .. })), 20);
        assert_eq!(count(|k| matches!(k, EventKind::RenewTs)), 10);
        assert_eq!(count(|k| matches!(k, EventKind::RenewCom)), 2);
        assert_eq!(count(|k| matches!(k, EventKind::Reshare)), 4);
        assert_eq!(s.expected_timestamps(false), 32);
        let total: u64 = s.tokens_per_tsa(&ev, false).values().sum();
        assert_eq!(total, 32);
        let total: u64 = s.tokens_per_tsa(&ev, true).values().sum();
        assert_eq!(total, s.expected_timestamps(true));
        assert_eq!(total, 12 * 160);
    }

    fn open_ended(horizon: u64, items: usize, p_ts: u64, p_com: u64, p_sh: u64) -> Schedule {
        let s = |id: &str, role, d: &str| SchemeSpec {
            id: id.into(),
            role,
            descriptor: d.into(),
            from: 0,
            until: None,
        };
        Schedule {
            horizon,
            items_per_epoch: items,
            ts_renew_period: p_ts,
            com_renew_period: p_com,
            reshare_period: p_sh,
            schemes: vec![
                s("sig", Role::Signature, "ed25519"),
                s("tsa", Role::Timestamp, "mss-sha256"),
                s("com", Role::Commitment, "hiding-hm256-sha256"),
                s("rvc", Role::RenewalCommitment, "merkle-sha256"),
            ],
            ..Schedule::default()
        }
    }

    proptest::proptest! {
        #[test]
        fn closed_form_matches_planned_tokens(
            horizon in 1u64..60,
            items in 1usize..40,
            p_ts in 1u64..12,
            p_com in 1u64..25,
            p_sh in 1u64..10,
        ) {
            let s = open_ended(horizon, items, p_ts, p_com, p_sh);
            let ev = s.plan().unwrap();
            for per_item in [false, true] {
                let planned: u64 = s.tokens_per_tsa(&ev, per_item).values().sum();
                proptest::prop_assert_eq!(planned, s.expected_timestamps(per_item));
            }
            proptest::prop_assert!(ev.windows(2).all(|w| w[0].t <= w[1].t));
        }
    }

    #[test]
    fn newest_valid_scheme_wins() {
        let s = Schedule::default();
        assert_eq!(s.current(Role::Timestamp, 7 * 12 - 1).unwrap().id, "tsa-1");
        assert_eq!(s.current(Role::Timestamp, 7 * 12).unwrap().id, "tsa-2");
        assert_eq!(s.current(Role::Commitment, 9 * 12 + 7).unwrap().id, "com-2");
    }

    #[test]
    fn late_rotation_is_rejected() {
        let mut s = Schedule::default();
        // tsa-1 now breaks in epoch 8 while epoch 7's renewal still uses it
        s.schemes[3].from = 9;
        s.schemes[2].until = Some(8);
        assert!(matches!(s.plan(), Err(ScheduleError::NoScheme { .. } | ScheduleError::NotRenewed { .. })));
        let mut s = Schedule::default();
        s.ts_renew_period = 20;
        assert!(matches!(s.plan(), Err(ScheduleError::NotRenewed { .. })));
    }

    #[test]
    fn shape_checks() {
        let mut s = Schedule::default();
        s.ticks_per_epoch = 5;
        assert!(matches!(s.plan(), Err(ScheduleError::Invalid(_))));
        let mut s = Schedule::default();
        s.policy = PolicySpec { n: 2, t: 3 };
        assert!(matches!(s.plan(), Err(ScheduleError::Invalid(_))));
    }

    #[test]
    fn heights() {
        assert_eq!(height_for(0), 1);
        assert_eq!(height_for(2), 1);
        assert_eq!(height_for(3), 2);
        assert_eq!(height_for(1024), 10);
        assert_eq!(height_for(1025), 11);
    }

    #[test]
    fn json_roundtrip() {
        let s = Schedule::default();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Schedule>(&j).unwrap(), s);
    }
}
