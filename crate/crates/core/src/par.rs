// SPDX-License-Identifier: Apache-2.0

//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it, or with [`Exec::Sequential`], everything runs
//! on the calling thread. Results are identical in both modes: randomness is
//! pre-split into per-item seeds by the caller, never drawn inside workers.

use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Whether work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<U, F>(exec: Exec, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Map with an independent, deterministic RNG per item, seeded from `rng`
/// before any work is dispatched.
pub fn map_seeded<T, U, F, R>(exec: Exec, items: &[T], rng: &mut R, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T, &mut ChaCha20Rng) -> U + Sync + Send,
    R: RngCore + ?Sized,
{
    let seeds: Vec<[u8; 32]> = items
        .iter()
        .map(|_| {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            s
        })
        .collect();
    let jobs: Vec<(&T, [u8; 32])> = items.iter().zip(seeds).collect();
    map(exec, &jobs, |(item, seed)| {
        let mut local = ChaCha20Rng::from_seed(*seed);
        f(item, &mut local)
    })
}
