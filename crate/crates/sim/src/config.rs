// SPDX-License-Identifier: Apache-2.0

//! CLI configuration and the on-disk client state.
//!
//! ```json
//! {
//!   "state_dir": "state",
//!   "seed": 7,
//!   "sharing": { "n": 3, "t": 2, "addresses": [] },
//!   "evidence": null,
//!   "max_batch": 1024,
//!   "schemes": [ { "id": "sig-1", "role": "signature", "descriptor": "ed25519", "from": 0 } ]
//! }
//! ```
//!
//! Scheme windows are in clock ticks here. Empty `addresses` keeps
//! shareholders under the state directory; otherwise one `tcp://host:port`
//! per shareholder. `evidence` is `null` for a local evidence service or a
//! `tcp://` address.
//!
//! State directory: `pki.json`, `keys.json` (signing keys), `clock`,
//! `sharing.json` (current policy and generation), `sh/g<gen>/<x>/` and
//! `es/` for local services.

use std::fs;
use std::path::{Path, PathBuf};

use elsa_core::encoding::{LogicalClock, Time};
use elsa_core::evidence::EvidenceService;
use elsa_core::sharing::SharingPolicy;
use elsa_core::sigs::{KeyPairRecord, PkiRegistry};
use elsa_core::timestamping::TimestampService;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{Role, Schedule, SchemeSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {msg}")]
    Missing { path: PathBuf, msg: String },
    #[error("bad config: {0}")]
    Invalid(String),
    #[error("state: {0}")]
    State(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub state_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    pub sharing: SharingPolicy,
    #[serde(default)]
    pub evidence: Option<String>,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default)]
    pub schemes: Vec<SchemeSpec>,
    /// Used by `simulate` when no schedule file is given.
    #[serde(default)]
    pub schedule: Option<Schedule>,
}

fn default_max_batch() -> usize {
    1024
}

pub fn window(s: &SchemeSpec) -> (Time, Time) {
    (s.from, s.until.unwrap_or(Time::MAX))
}

impl Config {
    /// Loads a config; a relative `state_dir` is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Missing {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let mut cfg: Config = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if cfg.state_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.state_dir = base.join(&cfg.state_dir);
        }
        cfg.sharing.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Newest scheme of `role` valid at `t`.
    pub fn current(&self, role: Role, t: Time) -> Result<&SchemeSpec, ConfigError> {
        self.schemes
            .iter()
            .filter(|s| s.role == role)
            .filter(|s| {
                let (from, to) = window(s);
                from <= t && t < to
            })
            .max_by_key(|s| s.from)
            .ok_or_else(|| ConfigError::Invalid(format!("no {role} scheme valid at {t}")))
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.state_dir.join(rel)
    }

    pub fn rng(&self, now: Time, purpose: u64) -> ChaCha20Rng {
        match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s ^ now.rotate_left(17) ^ purpose.rotate_left(43)),
            None => ChaCha20Rng::from_entropy(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignerRecord {
    pub key: KeyPairRecord,
    pub valid_from: Time,
    pub t_b: Time,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharingState {
    pub policy: SharingPolicy,
    pub generation: u64,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, ConfigError> {
    match fs::read_to_string(path) {
        Ok(s) => serde_json::from_str(&s)
            .map(Some)
            .map_err(|e| ConfigError::State(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(ConfigError::State(format!("{}: {e}", path.display()))),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ConfigError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ConfigError::State(e.to_string()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| ConfigError::State(format!("{}: {e}", path.display())))
}

pub fn load_pki(path: &Path) -> Result<Option<PkiRegistry>, ConfigError> {
    match fs::read_to_string(path) {
        Ok(s) => PkiRegistry::from_json(&s)
            .map(Some)
            .map_err(|e| ConfigError::State(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(ConfigError::State(e.to_string())),
    }
}

pub fn save_pki(path: &Path, pki: &PkiRegistry) -> Result<(), ConfigError> {
    write(path, pki.to_json().as_bytes())
}

impl Config {
    pub fn clock(&self) -> Result<LogicalClock, ConfigError> {
        let t = match fs::read_to_string(self.path("clock")) {
            Ok(s) => s.trim().parse().map_err(|_| ConfigError::State("clock file".into()))?,
            Err(_) => 0,
        };
        Ok(LogicalClock::new(t))
    }

    pub fn save_clock(&self, clock: &LogicalClock) -> Result<(), ConfigError> {
        write(&self.path("clock"), clock.now().to_string().as_bytes())
    }

    pub fn signers(&self) -> Result<Vec<SignerRecord>, ConfigError> {
        Ok(read_json(&self.path("keys.json"))?.unwrap_or_default())
    }

    pub fn save_signers(&self, recs: &[SignerRecord]) -> Result<(), ConfigError> {
        write(
            &self.path("keys.json"),
            serde_json::to_string_pretty(recs).expect("plain data").as_bytes(),
        )
    }

    pub fn sharing_state(&self) -> Result<SharingState, ConfigError> {
        Ok(read_json(&self.path("sharing.json"))?.unwrap_or_else(|| SharingState {
            policy: self.sharing.clone(),
            generation: 0,
        }))
    }

    pub fn save_sharing_state(&self, s: &SharingState) -> Result<(), ConfigError> {
        write(
            &self.path("sharing.json"),
            serde_json::to_string_pretty(s).expect("plain data").as_bytes(),
        )
    }

    /// Creates the configured timestamp authorities missing from `es` and
    /// publishes them. Returns how many were added.
    pub fn provision_tsas(&self, es: &mut EvidenceService, pki: &mut PkiRegistry, clock: &LogicalClock) -> Result<usize, ConfigError> {
        let mut added = 0;
        for (k, s) in self.schemes.iter().enumerate() {
            if s.role != Role::Timestamp || es.tsa(&s.id).is_some() {
                continue;
            }
            let (from, to) = window(s);
            let mut rng = self.rng(0, 0x7a5a_0000 + k as u64);
            let ts = TimestampService::setup(&s.id, &s.descriptor, from, to, clock.clone(), &mut rng)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", s.id)))?;
            if pki.get(&s.id).is_err() {
                pki.register(ts.instance().clone())
                    .map_err(|e| ConfigError::State(e.to_string()))?;
            }
            es.attach_tsa(ts).map_err(|e| ConfigError::State(e.to_string()))?;
            added += 1;
        }
        Ok(added)
    }
}
