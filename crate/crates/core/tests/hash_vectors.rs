// SPDX-License-Identifier: Apache-2.0

// The vector file is produced by tests/data/gen_hash_vectors.py, whose
// encoder shares no code with the crate.

use elsa_core::encoding::{CanonicalValue, TestVector};
use sha2::{Digest as _, Sha256, Sha512};

const VECTORS: &str = include_str!("data/hash_vectors.txt");

fn lines() -> impl Iterator<Item = &'static str> {
    VECTORS.lines().filter(|l| !l.trim().is_empty())
}

#[test]
fn every_vector_checks() {
    let mut n = 0;
    for line in lines() {
        let v = TestVector::parse_line(line).unwrap();
        assert!(v.check(), "{line}");
        assert_eq!(v.to_line(), line);
        n += 1;
    }
    assert!(n >= 40, "only {n} vectors");
}

#[test]
fn reencoding_is_byte_identical() {
    for line in lines() {
        let v = TestVector::parse_line(line).unwrap();
        let value = CanonicalValue::decode(&v.encoded).unwrap();
        let again = TestVector::compute(&v.key, &value).unwrap();
        assert_eq!(again, v);
    }
}

#[test]
fn digests_match_plain_sha2() {
    for line in lines() {
        let v = TestVector::parse_line(line).unwrap();
        let mut input = v.key.as_bytes().to_vec();
        input.extend_from_slice(&v.encoded);
        let expect: Vec<u8> = match v.key.as_bytes().len() {
            32 => Sha256::digest(&input).to_vec(),
            64 => Sha512::digest(&input).to_vec(),
            4 => Sha256::digest(&input)[..1].to_vec(),
            n => panic!("unexpected key length {n}"),
        };
        assert_eq!(v.digest.0, expect, "{line}");
    }
}

#[test]
fn corrupted_vector_fails() {
    let line = lines().nth(4).unwrap();
    let mut v = TestVector::parse_line(line).unwrap();
    v.digest.0[0] ^= 1;
    assert!(!v.check());
}
