// SPDX-License-Identifier: Apache-2.0

//! Sequential against rayon-parallel execution on the data-parallel paths:
//! hiding vector commitments, MSS key generation and a short simulation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use elsa_core::encoding::CanonicalValue;
use elsa_core::par::Exec;
use elsa_core::sigs::mss::{MssDescriptor, MssSecretKey};
use elsa_core::vector_com::VcParams;
use elsa_sim::schedule::Schedule;
use elsa_sim::simulate::{simulate, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn vector_commit(c: &mut Criterion) {
    let mut g = c.benchmark_group("hiding_commit_256");
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let params = VcParams::setup("hiding-hm256-sha256", 256, &mut rng).unwrap();
    let msgs: Vec<CanonicalValue> = (0..256u32).map(|i| CanonicalValue::bytes(i.to_be_bytes().repeat(256))).collect();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| params.commit_with(exec, &msgs, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn mss_keygen(c: &mut Criterion) {
    let mut g = c.benchmark_group("mss_keygen_h6");
    g.sample_size(10);
    let d = MssDescriptor::parse("mss-sha256-h6").unwrap();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            let mut rng = ChaCha20Rng::seed_from_u64(2);
            b.iter(|| MssSecretKey::generate(d, exec, &mut rng))
        });
    }
    g.finish();
}

fn short_simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_elsa_6_epochs");
    g.sample_size(10);
    let s = Schedule {
        horizon: 6,
        ..Schedule::default()
    };
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate(&s, Mode::Elsa, 3, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, vector_commit, mss_keygen, short_simulation);
criterion_main!(benches);
