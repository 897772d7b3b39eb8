// SPDX-License-Identifier: Apache-2.0

// A from-scratch Merkle oracle (own encoder, raw sha256) checked against the
// crate's commitment and openings.

use elsa_core::encoding::CanonicalValue;
use elsa_core::vector_com::{VcKind, VcParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

fn framed(tag: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = vec![tag];
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

fn h(key: &[u8], encoded: &[u8]) -> Vec<u8> {
    let mut s = Sha256::new();
    s.update(key);
    s.update(encoded);
    s.finalize().to_vec()
}

fn pair(l: &[u8], r: &[u8]) -> Vec<u8> {
    let mut body = framed(0x00, l);
    body.extend(framed(0x00, r));
    framed(0x01, &body)
}

/// Returns (commitment, levels bottom-up).
fn oracle(key: &[u8], msgs: &[Vec<u8>]) -> (Vec<u8>, Vec<Vec<Vec<u8>>>) {
    let width = msgs.len().next_power_of_two();
    let depth = width.trailing_zeros() as u64;
    let mut level: Vec<Vec<u8>> = msgs.iter().map(|m| h(key, &framed(0x00, m))).collect();
    level.resize(width, h(key, &framed(0x03, &[])));
    let mut levels = vec![level.clone()];
    while level.len() > 1 {
        level = level.chunks(2).map(|p| h(key, &pair(&p[0], &p[1]))).collect();
        levels.push(level.clone());
    }
    let mut body = framed(0x02, &depth.to_be_bytes());
    body.extend(framed(0x00, &level[0]));
    (h(key, &framed(0x01, &body)), levels)
}

#[test]
fn commitments_and_paths_match_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let params = VcParams::setup("merkle-sha256", 17, &mut rng).unwrap();
    let VcKind::Merkle { key } = &params.kind else { unreachable!() };
    for n in 1..=17usize {
        let msgs: Vec<Vec<u8>> = (0..n).map(|i| format!("item-{n}-{i}").into_bytes()).collect();
        let values: Vec<CanonicalValue> = msgs.iter().map(|m| CanonicalValue::bytes(m.clone())).collect();
        let (c, tree) = params.commit(&values, &mut rng).unwrap();
        let (expect, levels) = oracle(key.as_bytes(), &msgs);
        assert_eq!(c.0 .0, expect, "n={n}");
        for i in 0..n {
            let d = params.open(&tree, i).unwrap();
            let want: Vec<Vec<u8>> = (0..levels.len() - 1).map(|l| levels[l][(i >> l) ^ 1].clone()).collect();
            let got: Vec<Vec<u8>> = d.path.iter().map(|g| g.0.clone()).collect();
            assert_eq!(got, want, "n={n} i={i}");
            assert!(params.verify(&values[i], &c, &d, i as u64));
        }
    }
}
