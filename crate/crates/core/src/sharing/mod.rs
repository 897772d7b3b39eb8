// SPDX-License-Identifier: Apache-2.0

//! Byte-wise Shamir sharing over GF(2^8) with proactive refresh.
//!
//! Each byte of a secret gets its own degree-(T-1) polynomial, so shares are
//! exactly as long as the secret and no chunking is needed. Shares carry the
//! item name and a refresh epoch; reconstruction refuses to mix epochs.

pub mod cluster;
pub mod gf256;
pub mod net;
pub mod store;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{CanonicalValue, EncodingError};

pub use cluster::ShareCluster;
pub use store::{LocalShareholder, Shareholder};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SharingError {
    #[error("threshold {t} invalid for {n} shareholders")]
    Threshold { t: usize, n: usize },
    #[error("at most 255 shareholders are supported, got {0}")]
    TooManyShareholders(usize),
    #[error("need {need} shares, have {have}")]
    NotEnoughShares { have: usize, need: usize },
    #[error("shares come from different epochs")]
    EpochMismatch,
    #[error("shares belong to different items")]
    NameMismatch,
    #[error("duplicate share index {0}")]
    DuplicateX(u8),
    #[error("share lengths differ")]
    LengthMismatch,
    #[error("unknown item `{0}`")]
    UnknownName(String),
    #[error("item `{0}` is already stored")]
    AlreadyStored(String),
    #[error("shareholder {0} is unreachable")]
    Unreachable(u8),
    #[error("only {reachable} shareholders reachable, {needed} required")]
    Unavailable { reachable: usize, needed: usize },
    #[error("shareholder {0} has been shut down")]
    Shutdown(u8),
    #[error("reshare protocol: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

impl From<std::io::Error> for SharingError {
    fn from(e: std::io::Error) -> Self {
        SharingError::Io(e.to_string())
    }
}

pub type Result<T, E = SharingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Share {
    pub x: u8,
    pub y: Vec<u8>,
    pub name: String,
    pub epoch: u64,
}

impl Share {
    pub fn to_value(&self) -> CanonicalValue {
        CanonicalValue::tuple([
            CanonicalValue::UInt(self.x as u64),
            CanonicalValue::bytes(self.y.clone()),
            CanonicalValue::str(&self.name),
            CanonicalValue::UInt(self.epoch),
        ])
    }

    pub fn from_value(v: &CanonicalValue) -> Result<Self, EncodingError> {
        let items = v.as_tuple_of(4)?;
        let x = u8::try_from(items[0].as_uint()?).map_err(|_| EncodingError::Shape("share index below 256"))?;
        Ok(Share {
            x,
            y: items[1].as_bytes()?.to_vec(),
            name: items[2].as_str()?.to_owned(),
            epoch: items[3].as_uint()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingPolicy {
    pub n: usize,
    pub t: usize,
    /// One entry per shareholder: a directory, `mem`, or `tcp://host:port`.
    #[serde(default)]
    pub addresses: Vec<String>,
}

impl SharingPolicy {
    pub fn new(n: usize, t: usize) -> Result<Self> {
        let p = SharingPolicy {
            n,
            t,
            addresses: vec!["mem".into(); n],
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        check_params(self.n, self.t)?;
        if !self.addresses.is_empty() && self.addresses.len() != self.n {
            return Err(SharingError::Threshold { t: self.t, n: self.addresses.len() });
        }
        Ok(())
    }
}

fn check_params(n: usize, t: usize) -> Result<()> {
    if n > 255 {
        return Err(SharingError::TooManyShareholders(n));
    }
    if t == 0 || t > n {
        return Err(SharingError::Threshold { t, n });
    }
    Ok(())
}

/// Random polynomial evaluations: `out[i]` is the share vector for x = i+1.
/// Byte k's polynomial has `constant[k]` as its constant term.
fn evaluate_random<R: RngCore + ?Sized>(constant: &[u8], n: usize, t: usize, rng: &mut R) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; constant.len()]; n];
    let mut coeffs = vec![0u8; t];
    for (k, &b) in constant.iter().enumerate() {
        coeffs[0] = b;
        rng.fill_bytes(&mut coeffs[1..]);
        for (i, row) in out.iter_mut().enumerate() {
            row[k] = gf256::eval(&coeffs, (i + 1) as u8);
        }
    }
    out
}

/// Shares `secret` among x = 1..=n with threshold t.
pub fn share<R: RngCore + ?Sized>(secret: &[u8], n: usize, t: usize, rng: &mut R) -> Result<Vec<(u8, Vec<u8>)>> {
    check_params(n, t)?;
    Ok(evaluate_random(secret, n, t, rng)
        .into_iter()
        .enumerate()
        .map(|(i, y)| ((i + 1) as u8, y))
        .collect())
}

pub fn share_named<R: RngCore + ?Sized>(
    name: &str,
    epoch: u64,
    secret: &[u8],
    n: usize,
    t: usize,
    rng: &mut R,
) -> Result<Vec<Share>> {
    Ok(share(secret, n, t, rng)?
        .into_iter()
        .map(|(x, y)| Share {
            x,
            y,
            name: name.to_owned(),
            epoch,
        })
        .collect())
}

/// Sub-shares of a zero secret of length `len`, for refresh.
pub fn zero_sharing<R: RngCore + ?Sized>(len: usize, n: usize, t: usize, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    check_params(n, t)?;
    Ok(evaluate_random(&vec![0u8; len], n, t, rng))
}

/// Lagrange interpolation at zero with no metadata checks.
pub fn interpolate(points: &[(u8, &[u8])]) -> Result<Vec<u8>> {
    let Some(&(_, first)) = points.first() else {
        return Ok(Vec::new());
    };
    let mut xs = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if x == 0 || xs.contains(&x) {
            return Err(SharingError::DuplicateX(x));
        }
        if y.len() != first.len() {
            return Err(SharingError::LengthMismatch);
        }
        xs.push(x);
    }
    let weights = gf256::lagrange_at_zero(&xs);
    let mut out = vec![0u8; first.len()];
    for (&(_, y), &w) in points.iter().zip(&weights) {
        for (o, &b) in out.iter_mut().zip(y) {
            *o ^= gf256::mul(w, b);
        }
    }
    Ok(out)
}

/// Reconstructs from at least `t` shares of one item and one epoch.
pub fn reconstruct(shares: &[Share], t: usize) -> Result<Vec<u8>> {
    if t == 0 || shares.len() < t {
        return Err(SharingError::NotEnoughShares { have: shares.len(), need: t.max(1) });
    }
    let first = &shares[0];
    if shares.iter().any(|s| s.epoch != first.epoch) {
        return Err(SharingError::EpochMismatch);
    }
    if shares.iter().any(|s| s.name != first.name) {
        return Err(SharingError::NameMismatch);
    }
    let points: Vec<(u8, &[u8])> = shares[..t].iter().map(|s| (s.x, &s.y[..])).collect();
    interpolate(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn subsets(n: usize, t: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == t {
                out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
            }
        }
        out
    }

    #[test]
    fn degree_zero_copies_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for (_, y) in share(b"abc", 4, 1, &mut rng).unwrap() {
            assert_eq!(y, b"abc");
        }
    }

    #[test]
    fn parameter_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(share(b"a", 2, 3, &mut rng), Err(SharingError::Threshold { t: 3, n: 2 }));
        assert_eq!(share(b"a", 2, 0, &mut rng), Err(SharingError::Threshold { t: 0, n: 2 }));
        assert_eq!(share(b"a", 256, 2, &mut rng), Err(SharingError::TooManyShareholders(256)));
    }

    #[test]
    fn all_subsets_reconstruct() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for n in 1..=5 {
            for t in 1..=n {
                let secret: Vec<u8> = (0..33).map(|_| rng.next_u32() as u8).collect();
                let shares = share_named("f", 0, &secret, n, t, &mut rng).unwrap();
                for sub in subsets(n, t) {
                    let picked: Vec<Share> = sub.iter().map(|&i| shares[i].clone()).collect();
                    assert_eq!(reconstruct(&picked, t).unwrap(), secret);
                }
                if t > 1 {
                    assert!(matches!(
                        reconstruct(&shares[..t - 1], t),
                        Err(SharingError::NotEnoughShares { .. })
                    ));
                }
            }
        }
    }

    #[test]
    fn guards() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut shares = share_named("f", 0, b"xy", 3, 2, &mut rng).unwrap();
        let mut dup = shares.clone();
        dup[1].x = dup[0].x;
        assert_eq!(reconstruct(&dup, 2), Err(SharingError::DuplicateX(1)));
        shares[1].epoch = 1;
        assert_eq!(reconstruct(&shares, 2), Err(SharingError::EpochMismatch));
        shares[1].epoch = 0;
        shares[1].name = "g".into();
        assert_eq!(reconstruct(&shares, 2), Err(SharingError::NameMismatch));
    }

    #[test]
    fn empty_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let shares = share_named("e", 0, b"", 3, 2, &mut rng).unwrap();
        assert!(shares.iter().all(|s| s.y.is_empty()));
        assert_eq!(reconstruct(&shares, 2).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn zero_sharing_refresh_preserves_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let secret = b"refresh me".to_vec();
        let mut shares = share_named("f", 0, &secret, 4, 3, &mut rng).unwrap();
        let before = shares.clone();
        for _ in 0..2 {
            let deltas: Vec<Vec<Vec<u8>>> = (0..4)
                .map(|_| zero_sharing(secret.len(), 4, 3, &mut rng).unwrap())
                .collect();
            for (i, s) in shares.iter_mut().enumerate() {
                for d in &deltas {
                    s.y.iter_mut().zip(&d[i]).for_each(|(a, b)| *a ^= b);
                }
                s.epoch += 1;
            }
        }
        assert_ne!(shares[0].y, before[0].y);
        for sub in subsets(4, 3) {
            let picked: Vec<Share> = sub.iter().map(|&i| shares[i].clone()).collect();
            assert_eq!(reconstruct(&picked, 3).unwrap(), secret);
        }
        // an old share among new ones trips the guard
        let mixed = vec![shares[0].clone(), shares[1].clone(), before[2].clone()];
        assert_eq!(reconstruct(&mixed, 3), Err(SharingError::EpochMismatch));
    }

    #[test]
    fn share_value_roundtrip() {
        let s = Share {
            x: 7,
            y: vec![1, 2],
            name: "data/a".into(),
            epoch: 9,
        };
        assert_eq!(Share::from_value(&s.to_value()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn reconstruct_inverts_share(secret in proptest::collection::vec(any::<u8>(), 0..4096),
                                     n in 1usize..6, seed in any::<u64>()) {
            let t = 1 + (seed as usize % n);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let shares = share_named("p", 0, &secret, n, t, &mut rng).unwrap();
            prop_assert!(shares.iter().all(|s| s.y.len() == secret.len()));
            let tail = &shares[n - t..];
            prop_assert_eq!(reconstruct(tail, t).unwrap(), secret);
        }
    }
}
