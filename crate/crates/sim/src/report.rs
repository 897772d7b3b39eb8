// SPDX-License-Identifier: Apache-2.0

//! Simulation metrics, as JSON and as a plain-text table.
//!
//! Report JSON fields:
//!
//! | field | meaning |
//! |---|---|
//! | `mode` | `elsa` or `baseline` |
//! | `seed`, `horizon`, `items_per_epoch`, `item_size` | run parameters |
//! | `batches`, `ts_renewals`, `com_renewals`, `reshares` | events executed |
//! | `timestamps` | tokens issued by all authorities |
//! | `expected_timestamps` | closed-form count for the schedule and mode |
//! | `tokens_per_tsa` | tokens per authority id |
//! | `es_list_bytes` | encoded size of all evidence lists (commitments, openings, tokens) |
//! | `es_index_bytes` | encoded size of the name index |
//! | `shareholder_bytes` | per shareholder, size of its persisted share records |
//! | `verify_pass`, `verify_fail` | scheduled retrieve-and-verify outcomes |
//! | `phase_ms`, `wall_ms` | wall time per phase and in total |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::schedule::Schedule;
use crate::simulate::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: Mode,
    pub seed: u64,
    pub horizon: u64,
    pub items_per_epoch: usize,
    pub item_size: usize,
    pub batches: u64,
    pub ts_renewals: u64,
    pub com_renewals: u64,
    pub reshares: u64,
    pub timestamps: u64,
    pub expected_timestamps: u64,
    pub tokens_per_tsa: BTreeMap<String, u64>,
    pub es_list_bytes: u64,
    pub es_index_bytes: u64,
    pub shareholder_bytes: Vec<u64>,
    pub verify_pass: u64,
    pub verify_fail: u64,
    pub phase_ms: BTreeMap<String, f64>,
    pub wall_ms: f64,
}

/// The deterministic part of a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    pub timestamps: u64,
    pub tokens_per_tsa: BTreeMap<String, u64>,
    pub es_list_bytes: u64,
    pub es_index_bytes: u64,
    pub shareholder_bytes: Vec<u64>,
    pub verify: (u64, u64),
}

impl MetricsReport {
    pub fn new(schedule: &Schedule, mode: Mode, seed: u64) -> Self {
        MetricsReport {
            mode,
            seed,
            horizon: schedule.horizon,
            items_per_epoch: schedule.items_per_epoch,
            item_size: schedule.item_size,
            batches: 0,
            ts_renewals: 0,
            com_renewals: 0,
            reshares: 0,
            timestamps: 0,
            expected_timestamps: 0,
            tokens_per_tsa: BTreeMap::new(),
            es_list_bytes: 0,
            es_index_bytes: 0,
            shareholder_bytes: Vec::new(),
            verify_pass: 0,
            verify_fail: 0,
            phase_ms: BTreeMap::new(),
            wall_ms: 0.0,
        }
    }

    pub fn counts_and_bytes(&self) -> Counts {
        Counts {
            timestamps: self.timestamps,
            tokens_per_tsa: self.tokens_per_tsa.clone(),
            es_list_bytes: self.es_list_bytes,
            es_index_bytes: self.es_index_bytes,
            shareholder_bytes: self.shareholder_bytes.clone(),
            verify: (self.verify_pass, self.verify_fail),
        }
    }

    pub fn mean_shareholder_bytes(&self) -> f64 {
        if self.shareholder_bytes.is_empty() {
            return 0.0;
        }
        self.shareholder_bytes.iter().sum::<u64>() as f64 / self.shareholder_bytes.len() as f64
    }
}

fn kib(b: u64) -> String {
    format!("{:.1} KiB", b as f64 / 1024.0)
}

/// One column per report.
pub fn table(reports: &[MetricsReport]) -> String {
    let rows: Vec<(&str, Box<dyn Fn(&MetricsReport) -> String>)> = vec![
        ("mode", Box::new(|r| r.mode.name().to_owned())),
        ("items/epoch", Box::new(|r| r.items_per_epoch.to_string())),
        ("epochs", Box::new(|r| r.horizon.to_string())),
        (
            "events (B/R/C/S)",
            Box::new(|r| format!("{}/{}/{}/{}", r.batches, r.ts_renewals, r.com_renewals, r.reshares)),
        ),
        ("timestamps", Box::new(|r| r.timestamps.to_string())),
        ("closed form", Box::new(|r| r.expected_timestamps.to_string())),
        ("evidence lists", Box::new(|r| kib(r.es_list_bytes))),
        ("evidence index", Box::new(|r| kib(r.es_index_bytes))),
        ("shareholder (mean)", Box::new(|r| kib(r.mean_shareholder_bytes() as u64))),
        ("verify pass/fail", Box::new(|r| format!("{}/{}", r.verify_pass, r.verify_fail))),
        ("wall", Box::new(|r| format!("{:.0} ms", r.wall_ms))),
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(_, f)| reports.iter().map(|r| f(r)).collect())
        .collect();
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let col_w: Vec<usize> = (0..reports.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for ((label, _), row) in rows.iter().zip(&cells) {
        let _ = write!(out, "{label:<label_w$}");
        for (cell, w) in row.iter().zip(&col_w) {
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    }
    out
}
