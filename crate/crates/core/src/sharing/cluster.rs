// SPDX-License-Identifier: Apache-2.0

//! Data-owner side of the sharing layer: store and retrieve by name, share
//! refresh (node-to-node or central) and migration to a new node set.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::store::{LocalShareholder, Shareholder};
use super::{reconstruct, share_named, Result, Share, SharingError, SharingPolicy};
use crate::encoding::CanonicalValue;

pub struct ShareCluster {
    policy: SharingPolicy,
    holders: Vec<Box<dyn Shareholder>>,
    rng: ChaCha20Rng,
}

impl std::fmt::Debug for ShareCluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShareCluster").field("policy", &self.policy).finish_non_exhaustive()
    }
}

impl ShareCluster {
    /// `holders[i]` must answer for x = i+1.
    pub fn new(policy: SharingPolicy, holders: Vec<Box<dyn Shareholder>>, seed: u64) -> Result<Self> {
        policy.check()?;
        if holders.len() != policy.n {
            return Err(SharingError::Threshold { t: policy.t, n: holders.len() });
        }
        for (i, h) in holders.iter().enumerate() {
            if h.x() as usize != i + 1 {
                return Err(SharingError::Protocol(format!("holder {i} answers for x={}", h.x())));
            }
        }
        Ok(ShareCluster {
            policy,
            holders,
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    /// A cluster of in-memory nodes, seeded deterministically.
    pub fn in_memory(n: usize, t: usize, seed: u64) -> Result<Self> {
        let policy = SharingPolicy::new(n, t)?;
        let holders = (1..=n)
            .map(|x| Box::new(LocalShareholder::in_memory(x as u8, seed ^ ((x as u64) << 32))) as Box<dyn Shareholder>)
            .collect();
        Self::new(policy, holders, seed)
    }

    pub fn policy(&self) -> &SharingPolicy {
        &self.policy
    }

    pub fn holder_mut(&mut self, i: usize) -> &mut dyn Shareholder {
        self.holders[i].as_mut()
    }

    fn require_all(&mut self) -> Result<()> {
        let mut reachable = 0;
        let mut first_err = None;
        for h in &mut self.holders {
            match h.ping() {
                Ok(()) => reachable += 1,
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            None => Ok(()),
            Some(SharingError::Shutdown(x)) => Err(SharingError::Shutdown(x)),
            Some(_) => Err(SharingError::Unavailable {
                reachable,
                needed: self.policy.n,
            }),
        }
    }

    /// Cluster epoch as reported by the first reachable node.
    pub fn epoch(&mut self) -> Result<u64> {
        for h in &mut self.holders {
            if let Ok(e) = h.epoch() {
                return Ok(e);
            }
        }
        Err(SharingError::Unavailable {
            reachable: 0,
            needed: 1,
        })
    }

    pub fn contains(&mut self, name: &str) -> Result<bool> {
        for h in &mut self.holders {
            if let Ok(s) = h.get(name) {
                return Ok(s.is_some());
            }
        }
        Err(SharingError::Unavailable {
            reachable: 0,
            needed: 1,
        })
    }

    /// Writes need every node.
    pub fn store_bytes(&mut self, name: &str, secret: &[u8], overwrite: bool) -> Result<()> {
        self.require_all()?;
        if !overwrite && self.contains(name)? {
            return Err(SharingError::AlreadyStored(name.to_owned()));
        }
        let epoch = self.epoch()?;
        let shares = share_named(name, epoch, secret, self.policy.n, self.policy.t, &mut self.rng)?;
        for (h, s) in self.holders.iter_mut().zip(shares) {
            h.put(s, overwrite)?;
        }
        Ok(())
    }

    pub fn store(&mut self, name: &str, value: &CanonicalValue, overwrite: bool) -> Result<()> {
        self.store_bytes(name, &value.encode()?, overwrite)
    }

    /// Reads need any T nodes.
    pub fn retrieve_bytes(&mut self, name: &str) -> Result<Vec<u8>> {
        let t = self.policy.t;
        let mut got: Vec<Share> = Vec::with_capacity(t);
        let mut reachable = 0;
        let mut missing = 0;
        for h in &mut self.holders {
            match h.get(name) {
                Ok(Some(s)) => {
                    reachable += 1;
                    if got.first().is_some_and(|f| f.epoch != s.epoch) {
                        return Err(SharingError::EpochMismatch);
                    }
                    got.push(s);
                    if got.len() == t {
                        break;
                    }
                }
                Ok(None) => {
                    reachable += 1;
                    missing += 1;
                }
                Err(_) => {}
            }
        }
        if got.len() < t {
            if got.is_empty() && missing > 0 {
                return Err(SharingError::UnknownName(name.to_owned()));
            }
            return Err(SharingError::Unavailable { reachable, needed: t });
        }
        reconstruct(&got, t)
    }

    pub fn retrieve(&mut self, name: &str) -> Result<CanonicalValue> {
        Ok(CanonicalValue::decode(&self.retrieve_bytes(name)?)?)
    }

    /// Union of item names over reachable nodes.
    pub fn names(&mut self) -> Result<Vec<String>> {
        let mut all = BTreeSet::new();
        let mut reachable = 0;
        for h in &mut self.holders {
            if let Ok(ns) = h.names() {
                reachable += 1;
                all.extend(ns);
            }
        }
        if reachable < self.policy.t {
            return Err(SharingError::Unavailable {
                reachable,
                needed: self.policy.t,
            });
        }
        Ok(all.into_iter().collect())
    }

    fn abort_all(&mut self) {
        for h in &mut self.holders {
            let _ = h.abort();
        }
    }

    /// Node-to-node refresh: every node deals a zero-sharing of each item to
    /// its peers; on commit each node adds what it received.
    pub fn reshare(&mut self) -> Result<u64> {
        self.require_all()?;
        let epoch = self.epoch()?;
        let peers: Vec<u8> = self.holders.iter().map(|h| h.x()).collect();
        let t = self.policy.t;
        let result = (|| {
            let mut outgoing = Vec::with_capacity(self.holders.len());
            for h in &mut self.holders {
                outgoing.push((h.x(), h.reshare_begin(&peers, t)?));
            }
            for (from, per_peer) in outgoing {
                for (to, deltas) in per_peer {
                    self.holders[to as usize - 1].subshare(from, deltas)?;
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            self.abort_all();
            return Err(e);
        }
        self.commit_all(epoch + 1)
    }

    /// Refresh run by the data owner: reconstruct every item and re-deal it,
    /// delivered to each node as a delta against its current share.
    pub fn reshare_central(&mut self) -> Result<u64> {
        self.require_all()?;
        let epoch = self.epoch()?;
        let names = self.names()?;
        let peers: Vec<u8> = self.holders.iter().map(|h| h.x()).collect();
        let (n, t) = (self.policy.n, self.policy.t);
        let result = (|| {
            let mut deltas: Vec<Vec<(String, Vec<u8>)>> = vec![Vec::new(); n];
            for name in &names {
                let mut old = Vec::with_capacity(n);
                for h in &mut self.holders {
                    old.push(h.get(name)?.ok_or_else(|| SharingError::UnknownName(name.clone()))?);
                }
                let secret = reconstruct(&old, t)?;
                let fresh = share_named(name, epoch + 1, &secret, n, t, &mut self.rng)?;
                for (i, (o, f)) in old.iter().zip(&fresh).enumerate() {
                    let d = o.y.iter().zip(&f.y).map(|(a, b)| a ^ b).collect();
                    deltas[i].push((name.clone(), d));
                }
            }
            for h in &mut self.holders {
                h.reshare_begin(&peers, 1)?;
            }
            for (h, d) in self.holders.iter_mut().zip(deltas) {
                h.subshare(0, d)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            self.abort_all();
            return Err(e);
        }
        self.commit_all(epoch + 1)
    }

    fn commit_all(&mut self, new_epoch: u64) -> Result<u64> {
        for h in &mut self.holders {
            h.commit(new_epoch)?;
        }
        log::info!("shares refreshed to epoch {new_epoch}");
        Ok(new_epoch)
    }

    /// Moves every item to `target`, then shuts this node set down. Any read
    /// failure aborts before anything is written.
    pub fn migrate_to(&mut self, target: &mut ShareCluster) -> Result<usize> {
        self.require_all()?;
        target.require_all()?;
        let names = self.names()?;
        let mut items = Vec::with_capacity(names.len());
        for name in names {
            let data = self.retrieve_bytes(&name)?;
            items.push((name, data));
        }
        for (name, data) in &items {
            target.store_bytes(name, data, false)?;
        }
        for h in &mut self.holders {
            h.shutdown()?;
        }
        Ok(items.len())
    }

    pub fn stored_bytes(&mut self) -> Result<Vec<u64>> {
        self.holders.iter_mut().map(|h| h.stored_bytes()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> CanonicalValue {
        CanonicalValue::str(s)
    }

    #[test]
    fn store_retrieve_threshold() {
        let mut c = ShareCluster::in_memory(4, 3, 1).unwrap();
        c.store("data/a", &value("alpha"), false).unwrap();
        assert_eq!(c.retrieve("data/a").unwrap(), value("alpha"));
        assert_eq!(
            c.store("data/a", &value("x"), false),
            Err(SharingError::AlreadyStored("data/a".into()))
        );
        assert_eq!(c.retrieve("data/b"), Err(SharingError::UnknownName("data/b".into())));
    }

    fn set_online(c: &mut ShareCluster, i: usize, online: bool) {
        c.holder_mut(i).set_online(online);
    }

    #[test]
    fn availability() {
        let mut c = ShareCluster::in_memory(4, 3, 2).unwrap();
        c.store("k", &value("v"), false).unwrap();
        set_online(&mut c, 0, false);
        assert_eq!(c.retrieve("k").unwrap(), value("v"));
        assert!(matches!(
            c.store("k2", &value("v"), false),
            Err(SharingError::Unavailable { reachable: 3, needed: 4 })
        ));
        set_online(&mut c, 1, false);
        assert!(matches!(c.retrieve("k"), Err(SharingError::Unavailable { .. })));
        assert!(matches!(c.reshare(), Err(SharingError::Unavailable { .. })));
        set_online(&mut c, 0, true);
        set_online(&mut c, 1, true);
        assert_eq!(c.epoch().unwrap(), 0);
    }

    #[test]
    fn both_refresh_modes_preserve_items() {
        for central in [false, true] {
            let mut c = ShareCluster::in_memory(5, 3, 3).unwrap();
            let names: Vec<String> = (0..20).map(|i| format!("n{i}")).collect();
            for n in &names {
                c.store(n, &value(n), false).unwrap();
            }
            let before: Vec<Share> = names.iter().map(|n| c.holders[0].get(n).unwrap().unwrap()).collect();
            for round in 1..=2 {
                let e = if central { c.reshare_central() } else { c.reshare() }.unwrap();
                assert_eq!(e, round);
            }
            for (n, old) in names.iter().zip(&before) {
                assert_eq!(c.retrieve(n).unwrap(), value(n));
                let now = c.holders[0].get(n).unwrap().unwrap();
                assert_eq!(now.epoch, 2);
                assert_ne!(now.y, old.y);
            }
            // a store after refresh lands at the new epoch and mixes fine
            c.store("late", &value("late"), false).unwrap();
            assert_eq!(c.retrieve("late").unwrap(), value("late"));
        }
    }

    #[test]
    fn migration() {
        let mut old = ShareCluster::in_memory(4, 3, 4).unwrap();
        for i in 0..5 {
            old.store(&format!("x{i}"), &CanonicalValue::UInt(i), false).unwrap();
        }
        let mut new = ShareCluster::in_memory(5, 3, 5).unwrap();
        assert_eq!(old.migrate_to(&mut new).unwrap(), 5);
        for i in 0..5 {
            assert_eq!(new.retrieve(&format!("x{i}")).unwrap(), CanonicalValue::UInt(i));
        }
        assert!(old.retrieve("x0").is_err());
        assert!(matches!(old.names(), Err(SharingError::Unavailable { .. })));
    }

    #[test]
    fn migration_abort_leaves_old_set() {
        let mut old = ShareCluster::in_memory(3, 2, 6).unwrap();
        old.store("good", &value("g"), false).unwrap();
        // an item only one node holds cannot be read back
        old.holders[0]
            .put(
                Share {
                    x: 1,
                    y: vec![1],
                    name: "broken".into(),
                    epoch: 0,
                },
                false,
            )
            .unwrap();
        let mut new = ShareCluster::in_memory(3, 2, 7).unwrap();
        assert!(old.migrate_to(&mut new).is_err());
        assert_eq!(old.retrieve("good").unwrap(), value("g"));
        assert!(new.names().unwrap().is_empty());
    }
}
