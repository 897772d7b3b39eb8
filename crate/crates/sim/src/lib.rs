// SPDX-License-Identifier: Apache-2.0

//! Simulation harness, per-item baseline and command line for the archive.

pub mod cli;
pub mod config;
pub mod golden;
pub mod report;
pub mod schedule;
pub mod simulate;
