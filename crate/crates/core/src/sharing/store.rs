// SPDX-License-Identifier: Apache-2.0

//! Shareholder side: the per-node share database and the refresh steps a
//! node executes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{zero_sharing, Result, Share, SharingError};

const LOG_FILE: &str = "shares.log";

/// Sub-shares produced by one node for one peer: `(name, delta)` pairs.
pub type SubShares = Vec<(String, Vec<u8>)>;

/// Operations a shareholder node answers. Local and remote nodes implement
/// the same interface.
pub trait Shareholder: Send {
    fn x(&self) -> u8;
    fn ping(&mut self) -> Result<()>;
    fn put(&mut self, share: Share, overwrite: bool) -> Result<()>;
    fn get(&mut self, name: &str) -> Result<Option<Share>>;
    fn names(&mut self) -> Result<Vec<String>>;
    /// Current refresh epoch of the node.
    fn epoch(&mut self) -> Result<u64>;
    /// Starts a refresh: returns, per peer index, zero-sharing deltas for
    /// every stored item.
    fn reshare_begin(&mut self, peers: &[u8], t: usize) -> Result<Vec<(u8, SubShares)>>;
    fn subshare(&mut self, from: u8, deltas: SubShares) -> Result<()>;
    /// Applies all received deltas and moves to `new_epoch`, erasing the old
    /// shares.
    fn commit(&mut self, new_epoch: u64) -> Result<()>;
    fn abort(&mut self) -> Result<()>;
    fn shutdown(&mut self) -> Result<()>;
    /// Size of the node's persisted records in bytes.
    fn stored_bytes(&mut self) -> Result<u64>;
    /// Fault injection for simulations; nodes without a switch ignore it.
    fn set_online(&mut self, _online: bool) {}
}

/// One persisted record line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub name: String,
    pub epoch: u64,
    pub x: u8,
    pub share: String,
}

impl ShareRecord {
    fn from_share(s: &Share) -> Self {
        ShareRecord {
            name: s.name.clone(),
            epoch: s.epoch,
            x: s.x,
            share: hex::encode(&s.y),
        }
    }

    fn line(&self) -> String {
        let mut l = serde_json::to_string(self).expect("plain data");
        l.push('\n');
        l
    }
}

#[derive(Debug, Default)]
struct Pending {
    received: BTreeMap<u8, SubShares>,
}

/// In-process shareholder, optionally backed by a directory holding a
/// JSON-lines record log.
#[derive(Debug)]
pub struct LocalShareholder {
    x: u8,
    dir: Option<PathBuf>,
    epoch: u64,
    shares: BTreeMap<String, Share>,
    pending: Option<Pending>,
    rng: ChaCha20Rng,
    online: bool,
    shut_down: bool,
}

impl LocalShareholder {
    pub fn in_memory(x: u8, seed: u64) -> Self {
        LocalShareholder {
            x,
            dir: None,
            epoch: 0,
            shares: BTreeMap::new(),
            pending: None,
            rng: ChaCha20Rng::seed_from_u64(seed),
            online: true,
            shut_down: false,
        }
    }

    /// Opens (or creates) a persistent node. Replays the record log; a later
    /// record for a name replaces an earlier one.
    pub fn open(dir: &Path, x: u8, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut node = Self::in_memory(x, seed);
        node.dir = Some(dir.to_path_buf());
        let log = dir.join(LOG_FILE);
        if log.exists() {
            for (no, line) in fs::read_to_string(&log)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ShareRecord = serde_json::from_str(line)
                    .map_err(|e| SharingError::Io(format!("{}:{}: {e}", log.display(), no + 1)))?;
                if rec.x != x {
                    return Err(SharingError::Io(format!(
                        "{} holds shares for index {}, opened as {x}",
                        log.display(),
                        rec.x
                    )));
                }
                let y = hex::decode(&rec.share).map_err(|e| SharingError::Io(e.to_string()))?;
                node.epoch = node.epoch.max(rec.epoch);
                node.shares.insert(
                    rec.name.clone(),
                    Share {
                        x,
                        y,
                        name: rec.name,
                        epoch: rec.epoch,
                    },
                );
            }
        }
        Ok(node)
    }

    pub fn is_shut_down(&self) -> bool {
        self.shut_down
    }

    /// Every share currently held, for inspection in tests and reports.
    pub fn snapshot(&self) -> Vec<Share> {
        self.shares.values().cloned().collect()
    }

    fn ready(&self) -> Result<()> {
        if self.shut_down {
            return Err(SharingError::Shutdown(self.x));
        }
        if !self.online {
            return Err(SharingError::Unreachable(self.x));
        }
        Ok(())
    }

    fn append(&self, share: &Share) -> Result<()> {
        if let Some(dir) = &self.dir {
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(LOG_FILE))?;
            f.write_all(ShareRecord::from_share(share).line().as_bytes())?;
        }
        Ok(())
    }

    fn rewrite(&self) -> Result<()> {
        if let Some(dir) = &self.dir {
            let tmp = dir.join(format!("{LOG_FILE}.tmp"));
            fs::write(&tmp, self.serialized())?;
            fs::rename(&tmp, dir.join(LOG_FILE))?;
        }
        Ok(())
    }

    fn serialized(&self) -> String {
        self.shares
            .values()
            .map(|s| ShareRecord::from_share(s).line())
            .collect()
    }
}

impl Shareholder for LocalShareholder {
    fn x(&self) -> u8 {
        self.x
    }

    fn ping(&mut self) -> Result<()> {
        self.ready()
    }

    fn put(&mut self, mut share: Share, overwrite: bool) -> Result<()> {
        self.ready()?;
        if share.x != self.x {
            return Err(SharingError::Protocol(format!("share for {} sent to {}", share.x, self.x)));
        }
        if !overwrite && self.shares.contains_key(&share.name) {
            return Err(SharingError::AlreadyStored(share.name));
        }
        share.epoch = self.epoch;
        self.append(&share)?;
        self.shares.insert(share.name.clone(), share);
        Ok(())
    }

    fn get(&mut self, name: &str) -> Result<Option<Share>> {
        self.ready()?;
        Ok(self.shares.get(name).cloned())
    }

    fn names(&mut self) -> Result<Vec<String>> {
        self.ready()?;
        Ok(self.shares.keys().cloned().collect())
    }

    fn epoch(&mut self) -> Result<u64> {
        self.ready()?;
        Ok(self.epoch)
    }

    fn reshare_begin(&mut self, peers: &[u8], t: usize) -> Result<Vec<(u8, SubShares)>> {
        self.ready()?;
        if !peers.contains(&self.x) {
            return Err(SharingError::Protocol(format!("{} not among peers", self.x)));
        }
        let mut out: Vec<(u8, SubShares)> = peers.iter().map(|&p| (p, Vec::new())).collect();
        let n = peers.iter().copied().max().unwrap_or(0) as usize;
        for share in self.shares.values() {
            // evaluations at every x up to the largest peer index
            let evals = zero_sharing(share.y.len(), n, t, &mut self.rng)?;
            for (p, list) in out.iter_mut() {
                list.push((share.name.clone(), evals[*p as usize - 1].clone()));
            }
        }
        self.pending = Some(Pending::default());
        Ok(out)
    }

    fn subshare(&mut self, from: u8, deltas: SubShares) -> Result<()> {
        self.ready()?;
        let pending = self
            .pending
            .as_mut()
            .ok_or_else(|| SharingError::Protocol("subshare without begin".into()))?;
        if pending.received.insert(from, deltas).is_some() {
            return Err(SharingError::Protocol(format!("second subshare from {from}")));
        }
        Ok(())
    }

    fn commit(&mut self, new_epoch: u64) -> Result<()> {
        self.ready()?;
        if new_epoch <= self.epoch {
            return Err(SharingError::Protocol(format!("epoch {new_epoch} does not advance {}", self.epoch)));
        }
        let pending = self
            .pending
            .take()
            .ok_or_else(|| SharingError::Protocol("commit without begin".into()))?;
        let mut next = self.shares.clone();
        for deltas in pending.received.values() {
            for (name, d) in deltas {
                let s = next
                    .get_mut(name)
                    .ok_or_else(|| SharingError::Protocol(format!("delta for unknown item {name}")))?;
                if s.y.len() != d.len() {
                    return Err(SharingError::LengthMismatch);
                }
                s.y.iter_mut().zip(d).for_each(|(a, b)| *a ^= b);
            }
        }
        for s in next.values_mut() {
            s.epoch = new_epoch;
        }
        self.shares = next;
        self.epoch = new_epoch;
        self.rewrite()
    }

    fn abort(&mut self) -> Result<()> {
        self.pending = None;
        Ok(())
    }

    fn shutdown(&mut self) -> Result<()> {
        self.ready()?;
        self.shares.clear();
        self.pending = None;
        if let Some(dir) = &self.dir {
            let log = dir.join(LOG_FILE);
            if log.exists() {
                fs::remove_file(log)?;
            }
        }
        self.shut_down = true;
        Ok(())
    }

    fn stored_bytes(&mut self) -> Result<u64> {
        self.ready()?;
        Ok(self.serialized().len() as u64)
    }

    /// An offline node refuses every request.
    fn set_online(&mut self, online: bool) {
        self.online = online;
    }
}
