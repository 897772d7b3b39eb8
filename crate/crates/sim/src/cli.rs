// SPDX-License-Identifier: Apache-2.0

//! The `elsa` command line. Exit codes: 0 success, 1 verification or
//! operation failure, 2 usage or configuration error.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use elsa_core::client::bundle::EvidenceBundle;
use elsa_core::client::{self, Archive, ClientError};
use elsa_core::encoding::{CanonicalValue, LogicalClock, Time};
use elsa_core::evidence::net::{handle as es_handle, RemoteEvidence};
use elsa_core::evidence::{EvidenceApi, EvidenceEntry, EvidenceService};
use elsa_core::net;
use elsa_core::par::Exec;
use elsa_core::sharing::net::{serve_shareholder, RemoteShareholder};
use elsa_core::sharing::{LocalShareholder, ShareCluster, Shareholder, SharingPolicy};
use elsa_core::sigs::{PkiRegistry, SignatureKeyPair};
use elsa_core::timestamping::TimestampToken;
use elsa_core::vector_com::VectorCommitment;
use rand::RngCore;

use crate::config::{load_pki, save_pki, window, Config, ConfigError, SharingState, SignerRecord};
use crate::report::{table, MetricsReport};
use crate::schedule::{Role, Schedule};
use crate::simulate::{simulate, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "elsa", version, about = "Long-term secure archive client, services and simulator")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, short, global = true, env = "ELSA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Move the logical clock forward to this tick before running.
    #[arg(long, global = true)]
    pub time: Option<Time>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create the state directory, keys and scheme parameters.
    Init {
        #[arg(long)]
        force: bool,
    },
    /// Store files as one batch; names are the file names.
    Store {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Write `<name>` and `<name>.evidence` into a directory.
    Retrieve {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Verify a data file against its evidence bundle.
    Verify {
        data: PathBuf,
        evidence: PathBuf,
        /// Registry JSON; defaults to the state directory's.
        #[arg(long)]
        pki: Option<PathBuf>,
        /// Verification time; defaults to the state clock.
        #[arg(long)]
        at: Option<Time>,
        /// Expected storage time; defaults to the first token's time.
        #[arg(long)]
        t_store: Option<Time>,
    },
    RenewTs,
    RenewCom,
    /// Refresh all shares in place.
    RenewShares {
        /// Let the client deal the refresh instead of the shareholders.
        #[arg(long)]
        central: bool,
    },
    /// Move everything to a new set of shareholders.
    MigrateSharing {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        /// `tcp://host:port` per shareholder; local directories if omitted.
        #[arg(long, num_args = 1..)]
        shareholders: Vec<String>,
    },
    /// Run the schedule in one or both modes.
    Simulate {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Schedule JSON; otherwise the config's, otherwise the default.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        sequential: bool,
        /// Write the reports as a JSON array.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print report JSON files as a table.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    ServeShareholder {
        #[arg(long)]
        x: u8,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        listen: String,
    },
    ServeEvidence {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        listen: String,
        #[arg(long, hide = true)]
        max_requests: Option<usize>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAIL,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Local or remote evidence service.
pub enum Evidence {
    Local(EvidenceService),
    Remote(RemoteEvidence),
}

macro_rules! delegate {
    ($self:ident, $e:ident => $call:expr) => {
        match $self {
            Evidence::Local($e) => $call,
            Evidence::Remote($e) => $call,
        }
    };
}

impl EvidenceApi for Evidence {
    fn add_com(&mut self, names: &[String], vc: &str, c: &VectorCommitment, ts: &str) -> elsa_core::evidence::Result<TimestampToken> {
        delegate!(self, e => e.add_com(names, vc, c, ts))
    }

    fn renew_ts(&mut self, vc: &str, params: &CanonicalValue, ts: &str) -> elsa_core::evidence::Result<Option<TimestampToken>> {
        delegate!(self, e => e.renew_ts(vc, params, ts))
    }

    fn add_com_renew(
        &mut self,
        vc: &str,
        c: &VectorCommitment,
        positions: &[(String, u64)],
        ts: &str,
    ) -> elsa_core::evidence::Result<TimestampToken> {
        delegate!(self, e => e.add_com_renew(vc, c, positions, ts))
    }

    fn get_evidence(&mut self, name: &str) -> elsa_core::evidence::Result<Vec<EvidenceEntry>> {
        delegate!(self, e => e.get_evidence(name))
    }

    fn names(&mut self) -> elsa_core::evidence::Result<Vec<String>> {
        delegate!(self, e => e.names())
    }
}

fn cluster(cfg: &Config, state: &SharingState, seed: u64) -> Result<ShareCluster> {
    let p = &state.policy;
    let mut holders: Vec<Box<dyn Shareholder>> = Vec::with_capacity(p.n);
    for x in 1..=p.n {
        let addr = p.addresses.get(x - 1).map(String::as_str).unwrap_or("");
        let h: Box<dyn Shareholder> = if addr.starts_with("tcp://") {
            Box::new(RemoteShareholder::new(x as u8, addr))
        } else {
            let dir = cfg.path(&format!("sh/g{}/{x}", state.generation));
            Box::new(LocalShareholder::open(&dir, x as u8, seed ^ x as u64).map_err(ClientError::from)?)
        };
        holders.push(h);
    }
    let policy = SharingPolicy {
        n: p.n,
        t: p.t,
        addresses: Vec::new(),
    };
    Ok(ShareCluster::new(policy, holders, seed).map_err(ClientError::from)?)
}

struct Session {
    cfg: Config,
    clock: LogicalClock,
    archive: Archive<Evidence>,
}

impl Session {
    fn open(cfg: Config, time: Option<Time>, tick: bool, init: Option<bool>) -> Result<Self> {
        let clock = cfg.clock()?;
        let fresh = init.is_some();
        if !fresh && !cfg.path("pki.json").exists() {
            return Err(ConfigError::State(format!("{} is not initialized; run `elsa init`", cfg.state_dir.display())).into());
        }
        match time {
            Some(t) if t < clock.now() => {
                return Err(CliError::Usage(format!("clock is at {}, cannot go back to {t}", clock.now())));
            }
            Some(t) => {
                clock.advance_to(t);
            }
            None if tick => {
                clock.advance_by(1);
            }
            None => {}
        }
        // a remote evidence service reads the clock file when it stamps
        if time.is_some() || tick {
            cfg.save_clock(&clock)?;
        }
        let now = clock.now();
        let mut seeds = cfg.rng(now, 1);
        let mut pki = load_pki(&cfg.path("pki.json"))?.unwrap_or_default();
        let es = match &cfg.evidence {
            Some(addr) => Evidence::Remote(RemoteEvidence::new(addr)),
            None => {
                let mut es = EvidenceService::open(&cfg.path("es"), seeds.next_u64(), clock.clone())
                    .map_err(ClientError::from)?;
                if fresh {
                    cfg.provision_tsas(&mut es, &mut pki, &clock)?;
                }
                Evidence::Local(es)
            }
        };
        let sh = cluster(&cfg, &cfg.sharing_state()?, seeds.next_u64())?;
        let force = init.unwrap_or(true);
        let mut archive = Archive::init(sh, es, pki, clock.clone(), seeds.next_u64(), force)?;
        for r in cfg.signers()? {
            archive.restore_signer(SignatureKeyPair::from_record(&r.key).map_err(ClientError::from)?);
        }
        Ok(Session { cfg, clock, archive })
    }

    fn current(&self, role: Role) -> Result<String> {
        Ok(self.cfg.current(role, self.clock.now())?.id.clone())
    }

    fn save(&mut self) -> Result<()> {
        let old = self.cfg.signers()?;
        let recs: Vec<SignerRecord> = self
            .archive
            .signers()
            .map(|k| {
                let (valid_from, t_b) = old
                    .iter()
                    .find(|r| r.key.scheme_id == k.scheme_id)
                    .map(|r| (r.valid_from, r.t_b))
                    .or_else(|| self.archive.pki.get(&k.scheme_id).ok().map(|i| (i.valid_from, i.t_b)))
                    .unwrap_or((0, Time::MAX));
                SignerRecord {
                    key: k.to_record(),
                    valid_from,
                    t_b,
                }
            })
            .collect();
        self.cfg.save_signers(&recs)?;
        save_pki(&self.cfg.path("pki.json"), &self.archive.pki)?;
        self.cfg.save_clock(&self.clock)?;
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let path = path.ok_or_else(|| CliError::Usage("no configuration: pass --config or set ELSA_CONFIG".into()))?;
    Ok(Config::load(path)?)
}

fn init(cfg: Config, time: Option<Time>, force: bool) -> Result<String> {
    let mut s = Session::open(cfg, time, false, Some(force))?;
    let now = s.clock.now();
    let schemes = s.cfg.schemes.clone();
    for spec in &schemes {
        if s.archive.pki.get(&spec.id).is_ok() {
            continue;
        }
        let (from, to) = window(spec);
        match spec.role {
            Role::Signature => {
                let key = SignatureKeyPair::setup(&spec.id, &spec.descriptor, s.archive.rng()).map_err(ClientError::from)?;
                s.archive.add_signer(key, from, to)?;
            }
            Role::Commitment | Role::RenewalCommitment => {
                let max = s.cfg.max_batch;
                s.archive.add_vc(&spec.id, &spec.descriptor, max, from, to)?;
            }
            Role::Timestamp => {
                if s.archive.pki.get(&spec.id).is_err() {
                    return Err(failed(format!(
                        "timestamp scheme `{}` is not published; start the evidence service with this config first",
                        spec.id
                    )));
                }
            }
        }
    }
    s.save()?;
    Ok(format!(
        "initialized {} at t={now}: {} schemes registered",
        s.cfg.state_dir.display(),
        s.archive.pki.len()
    ))
}

fn file_name(p: &Path) -> Result<String> {
    p.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CliError::Usage(format!("{}: no usable file name", p.display())))
}

fn read(p: &Path) -> Result<Vec<u8>> {
    fs::read(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

fn verify_cmd(
    cfg: Option<Config>,
    data: &Path,
    evidence: &Path,
    pki_path: Option<&Path>,
    at: Option<Time>,
    t_store: Option<Time>,
) -> Result<(bool, String)> {
    let pki_path = match (pki_path, &cfg) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(c)) => c.path("pki.json"),
        (None, None) => return Err(CliError::Usage("verify needs --pki or a configuration".into())),
    };
    let pki: PkiRegistry = load_pki(&pki_path)?.ok_or_else(|| CliError::Usage(format!("{}: not found", pki_path.display())))?;
    let at = match (at, &cfg) {
        (Some(t), _) => t,
        (None, Some(c)) => c.clock()?.now(),
        (None, None) => return Err(CliError::Usage("verify needs --at or a configuration".into())),
    };
    let dat = read(data)?;
    let bundle = match EvidenceBundle::from_bytes(&read(evidence)?) {
        Ok(b) => b,
        Err(e) => return Ok((false, format!("FAIL: {e}"))),
    };
    let file = match bundle.with_data(dat.clone()) {
        Ok(f) => f,
        Err(e) => return Ok((false, format!("FAIL: {e}"))),
    };
    let Some(first) = file.entries.first() else {
        return Ok((false, "FAIL: no evidence entries".into()));
    };
    let t_store = t_store.unwrap_or(first.token().t);
    Ok(match client::verify_detailed(&pki, at, &dat, t_store, &file) {
        Ok(()) => (
            true,
            format!("OK: {} entries, stored at {t_store}, valid at {at}", file.entries.len()),
        ),
        Err(f) => (false, format!("FAIL: {f}")),
    })
}

fn simulate_cmd(
    cfg: Option<Config>,
    mode: Option<Mode>,
    schedule: Option<&Path>,
    items: Option<usize>,
    horizon: Option<u64>,
    seed: u64,
    sequential: bool,
    out: Option<&Path>,
) -> Result<(bool, String)> {
    let mut sched = match schedule {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => cfg.and_then(|c| c.schedule).unwrap_or_default(),
    };
    if let Some(n) = items {
        sched.items_per_epoch = n;
    }
    if let Some(h) = horizon {
        sched.horizon = h;
    }
    let sched: Schedule = sched;
    sched.plan().map_err(|e| CliError::Usage(e.to_string()))?;
    let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
    let modes = match mode {
        Some(m) => vec![m],
        None => vec![Mode::Elsa, Mode::Baseline],
    };
    let reports = modes
        .into_iter()
        .map(|m| simulate(&sched, m, seed, exec).map_err(failed))
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(&reports).expect("plain data")).map_err(failed)?;
    }
    let ok = reports.iter().all(|r| r.verify_fail == 0 && r.timestamps == r.expected_timestamps);
    Ok((ok, table(&reports)))
}

fn report_cmd(files: &[PathBuf]) -> Result<String> {
    let mut all = Vec::new();
    for f in files {
        let bytes = read(f)?;
        if let Ok(list) = serde_json::from_slice::<Vec<MetricsReport>>(&bytes) {
            all.extend(list);
        } else {
            all.push(serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?);
        }
    }
    Ok(table(&all))
}

fn serve_evidence(cfg: Option<Config>, dir: &Path, listen: &str, max: Option<usize>) -> Result<()> {
    let clock = match &cfg {
        Some(c) => c.clock()?,
        None => LogicalClock::new(0),
    };
    let mut es = EvidenceService::open(dir, rand::thread_rng().next_u64(), clock.clone()).map_err(ClientError::from)?;
    if let Some(c) = &cfg {
        let pki_path = c.path("pki.json");
        let mut pki = load_pki(&pki_path)?.unwrap_or_default();
        if c.provision_tsas(&mut es, &mut pki, &clock)? > 0 {
            save_pki(&pki_path, &pki)?;
        }
    }
    let listener = TcpListener::bind(listen.trim_start_matches("tcp://")).map_err(failed)?;
    log::info!("evidence service on {}", listener.local_addr().map_err(failed)?);
    let mut served = 0usize;
    net::serve(listener, |req| {
        // the client's clock file is the shared time source
        if let Some(c) = &cfg {
            if let Ok(t) = c.clock() {
                clock.advance_to(t.now());
            }
        }
        served += 1;
        (es_handle(&mut es, req), max.is_some_and(|m| served >= m))
    })
    .map_err(failed)
}

/// Runs one command, returning the exit code and what to print.
pub fn run(cli: Cli) -> (i32, String) {
    let res = dispatch(cli);
    match res {
        Ok((true, out)) => (EXIT_OK, out),
        Ok((false, out)) => (EXIT_FAIL, out),
        Err(e) => (e.exit_code(), format!("error: {e}")),
    }
}

fn dispatch(cli: Cli) -> Result<(bool, String)> {
    let cfg_path = cli.config.as_deref();
    let ok = |s: String| Ok((true, s));
    match cli.command {
        Command::Init { force } => ok(init(load_config(cfg_path)?, cli.time, force)?),
        Command::Store { files } => {
            let mut s = Session::open(load_config(cfg_path)?, cli.time, true, None)?;
            let batch = files
                .iter()
                .map(|p| Ok((file_name(p)?, read(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let (sig, vc, ts) = (s.current(Role::Signature)?, s.current(Role::Commitment)?, s.current(Role::Timestamp)?);
            let r = s.archive.store(&batch, &sig, &vc, &ts)?;
            s.save()?;
            ok(format!("stored {} files at t={} ({sig}, {vc}, {ts})", batch.len(), r.token.t))
        }
        Command::Retrieve { name, out } => {
            let mut s = Session::open(load_config(cfg_path)?, cli.time, false, None)?;
            let f = s.archive.retrieve(&name)?;
            fs::create_dir_all(&out).map_err(failed)?;
            fs::write(out.join(&name), &f.dat).map_err(failed)?;
            let bundle = EvidenceBundle::from_retrieved(&f).to_bytes().map_err(failed)?;
            fs::write(out.join(format!("{name}.evidence")), bundle).map_err(failed)?;
            ok(format!("{name}: {} bytes, {} evidence entries", f.dat.len(), f.entries.len()))
        }
        Command::Verify {
            data,
            evidence,
            pki,
            at,
            t_store,
        } => {
            let cfg = cfg_path.map(Config::load).transpose()?;
            verify_cmd(cfg, &data, &evidence, pki.as_deref(), at, t_store)
        }
        Command::RenewTs => {
            let mut s = Session::open(load_config(cfg_path)?, cli.time, true, None)?;
            let (vc, ts) = (s.current(Role::RenewalCommitment)?, s.current(Role::Timestamp)?);
            let tok = s.archive.renew_ts(&vc, &ts)?;
            s.save()?;
            ok(match tok {
                Some(t) => format!("timestamps renewed at t={} ({vc}, {ts})", t.t),
                None => "nothing to renew".into(),
            })
        }
        Command::RenewCom => {
            let mut s = Session::open(load_config(cfg_path)?, cli.time, true, None)?;
            let (vc, ts) = (s.current(Role::Commitment)?, s.current(Role::Timestamp)?);
            let tok = s.archive.renew_com(&vc, &ts)?;
            s.save()?;
            ok(format!("commitments renewed at t={} ({vc}, {ts})", tok.t))
        }
        Command::RenewShares { central } => {
            let mut s = Session::open(load_config(cfg_path)?, cli.time, true, None)?;
            let epoch = s.archive.renew_shares(central)?;
            s.save()?;
            ok(format!("shares refreshed, epoch {epoch}"))
        }
        Command::MigrateSharing { n, t, shareholders } => {
            let mut s = Session::open(load_config(cfg_path)?, cli.time, true, None)?;
            if !shareholders.is_empty() && shareholders.len() != n {
                return Err(CliError::Usage(format!("{n} shareholders needed, {} given", shareholders.len())));
            }
            let old = s.cfg.sharing_state()?;
            let next = SharingState {
                policy: SharingPolicy {
                    n,
                    t,
                    addresses: shareholders,
                },
                generation: old.generation + 1,
            };
            next.policy.check().map_err(|e| CliError::Usage(e.to_string()))?;
            let seed = s.cfg.rng(s.clock.now(), 2).next_u64();
            let target = cluster(&s.cfg, &next, seed)?;
            let moved = s.archive.renew_sharing(target)?;
            s.cfg.save_sharing_state(&next)?;
            s.save()?;
            if old.policy.addresses.is_empty() {
                let _ = fs::remove_dir_all(s.cfg.path(&format!("sh/g{}", old.generation)));
            }
            ok(format!("moved {moved} items to {n} shareholders (threshold {t})"))
        }
        Command::Simulate {
            mode,
            schedule,
            items,
            horizon,
            seed,
            sequential,
            out,
        } => {
            let cfg = cfg_path.map(Config::load).transpose()?;
            simulate_cmd(cfg, mode, schedule.as_deref(), items, horizon, seed, sequential, out.as_deref())
        }
        Command::Report { files } => ok(report_cmd(&files)?),
        Command::ServeShareholder { x, dir, listen } => {
            let mut node = LocalShareholder::open(&dir, x, rand::thread_rng().next_u64()).map_err(ClientError::from)?;
            let listener = TcpListener::bind(listen.trim_start_matches("tcp://")).map_err(failed)?;
            log::info!("shareholder {x} on {}", listener.local_addr().map_err(failed)?);
            serve_shareholder(listener, &mut node).map_err(failed)?;
            ok(format!("shareholder {x} stopped"))
        }
        Command::ServeEvidence {
            dir,
            listen,
            max_requests,
        } => {
            let cfg = cfg_path.map(Config::load).transpose()?;
            serve_evidence(cfg, &dir, &listen, max_requests)?;
            ok("evidence service stopped".into())
        }
    }
}
