// SPDX-License-Identifier: Apache-2.0

//! Long-term secure archive with renewable integrity evidence.

pub mod client;
pub mod encoding;
pub mod evidence;
pub mod hiding_com;
pub mod net;
pub mod par;
pub mod sharing;
pub mod sigs;
pub mod timestamping;
pub mod vector_com;
