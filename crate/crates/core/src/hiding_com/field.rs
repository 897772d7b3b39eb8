// SPDX-License-Identifier: Apache-2.0

//! Arithmetic in GF(2^n) for the sparse moduli used by the hiding commitment.
//! Elements are polynomials over GF(2) with bit `i` holding the coefficient of
//! `x^i`; limbs are little-endian `u64`s, the byte form is big-endian.

/// GF(2^n) defined by `x^n + sum(x^t for t in taps)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryField {
    degree: usize,
    taps: &'static [usize],
}

impl BinaryField {
    pub const fn new(degree: usize, taps: &'static [usize]) -> Self {
        BinaryField { degree, taps }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn taps(&self) -> &'static [usize] {
        self.taps
    }

    pub fn byte_len(&self) -> usize {
        self.degree / 8
    }

    fn limbs(&self) -> usize {
        self.degree.div_ceil(64)
    }

    pub fn from_be_bytes(&self, bytes: &[u8]) -> Option<Vec<u64>> {
        if bytes.len() != self.byte_len() {
            return None;
        }
        let mut limbs = vec![0u64; self.limbs()];
        for (i, byte) in bytes.iter().rev().enumerate() {
            limbs[i / 8] |= (*byte as u64) << (8 * (i % 8));
        }
        Some(limbs)
    }

    pub fn to_be_bytes(&self, limbs: &[u64]) -> Vec<u8> {
        let n = self.byte_len();
        let mut out = vec![0u8; n];
        for (i, slot) in out.iter_mut().rev().enumerate() {
            *slot = (limbs[i / 8] >> (8 * (i % 8))) as u8;
        }
        out
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let l = self.limbs();
        let mut prod = vec![0u64; 2 * l];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                let (lo, hi) = clmul64(ai, bj);
                prod[i + j] ^= lo;
                prod[i + j + 1] ^= hi;
            }
        }
        self.reduce(prod)
    }

    /// Reduce a polynomial of degree < 2n modulo the field polynomial.
    pub fn reduce(&self, mut p: Vec<u64>) -> Vec<u64> {
        let n = self.degree;
        loop {
            let high = shr(&p, n);
            if high.iter().all(|&w| w == 0) {
                break;
            }
            truncate_bits(&mut p, n);
            for &t in self.taps {
                xor_shl(&mut p, &high, t);
            }
        }
        p.truncate(self.limbs());
        p
    }

    pub fn square(&self, a: &[u64]) -> Vec<u64> {
        self.mul(a, a)
    }
}

/// Carry-less 64x64 -> 128 multiply.
pub fn clmul64(a: u64, b: u64) -> (u64, u64) {
    let mut lo = 0u64;
    let mut hi = 0u64;
    let mut b = b;
    let mut i = 0;
    while b != 0 {
        if b & 1 == 1 {
            lo ^= a << i;
            if i > 0 {
                hi ^= a >> (64 - i);
            }
        }
        b >>= 1;
        i += 1;
    }
    (lo, hi)
}

fn shr(p: &[u64], bits: usize) -> Vec<u64> {
    let words = bits / 64;
    let rem = bits % 64;
    let mut out = vec![0u64; p.len()];
    for i in words..p.len() {
        let mut w = p[i] >> rem;
        if rem > 0 && i + 1 < p.len() {
            w |= p[i + 1] << (64 - rem);
        }
        out[i - words] = w;
    }
    out
}

fn truncate_bits(p: &mut [u64], bits: usize) {
    let words = bits / 64;
    let rem = bits % 64;
    if words < p.len() {
        if rem > 0 {
            p[words] &= (1u64 << rem) - 1;
            for w in &mut p[words + 1..] {
                *w = 0;
            }
        } else {
            for w in &mut p[words..] {
                *w = 0;
            }
        }
    }
}

fn xor_shl(dst: &mut [u64], src: &[u64], bits: usize) {
    let words = bits / 64;
    let rem = bits % 64;
    for (i, &w) in src.iter().enumerate() {
        if w == 0 {
            continue;
        }
        let j = i + words;
        if j < dst.len() {
            dst[j] ^= w << rem;
        }
        if rem > 0 && j + 1 < dst.len() {
            dst[j + 1] ^= w >> (64 - rem);
        }
    }
}

/// Polynomial helpers over GF(2)[x] used to check irreducibility of the
/// moduli (Rabin's test specialised to power-of-two degrees).
pub mod poly {
    use super::BinaryField;

    fn degree(p: &[u64]) -> Option<usize> {
        p.iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| 64 * i + 63 - w.leading_zeros() as usize)
    }

    fn xor_shifted(a: &mut Vec<u64>, b: &[u64], shift: usize) {
        let need = b.len() + shift / 64 + 1;
        if a.len() < need {
            a.resize(need, 0);
        }
        super::xor_shl(a, b, shift);
    }

    pub fn gcd(mut a: Vec<u64>, mut b: Vec<u64>) -> Vec<u64> {
        loop {
            let Some(db) = degree(&b) else {
                return a;
            };
            while let Some(da) = degree(&a) {
                if da < db {
                    break;
                }
                xor_shifted(&mut a, &b.clone(), da - db);
            }
            std::mem::swap(&mut a, &mut b);
        }
    }

    /// Full modulus `x^n + taps` as a limb vector.
    pub fn modulus(field: &BinaryField) -> Vec<u64> {
        let mut f = vec![0u64; field.degree() / 64 + 1];
        f[field.degree() / 64] |= 1 << (field.degree() % 64);
        for &t in field.taps() {
            f[t / 64] ^= 1 << (t % 64);
        }
        f
    }

    /// Rabin's test for degree `n = 2^k`: `x^(2^n) = x mod f` and
    /// `gcd(x^(2^(n/2)) - x, f) = 1`.
    pub fn is_irreducible(field: &BinaryField) -> bool {
        let n = field.degree();
        assert!(n.is_power_of_two(), "test specialised to power-of-two degrees");
        let limbs = n.div_ceil(64);
        let mut x = vec![0u64; limbs];
        x[0] = 2;
        let mut p = x.clone();
        let mut half = None;
        for i in 1..=n {
            p = field.square(&p);
            if i == n / 2 {
                half = Some(p.clone());
            }
        }
        if p != x {
            return false;
        }
        let mut h = half.expect("n >= 2");
        h[0] ^= 2;
        let g = gcd(modulus(field), h);
        degree(&g) == Some(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // AES field, checked against the textbook product {57}*{83} = {c1}.
    const AES_LIKE: BinaryField = BinaryField::new(8, &[4, 3, 1, 0]);

    #[test]
    fn clmul_matches_bitwise() {
        for (a, b) in [(3u64, 3u64), (u64::MAX, 2), (0x8000_0000_0000_0001, 0x8000_0000_0000_0001)] {
            let (lo, hi) = clmul64(a, b);
            let mut exp = 0u128;
            for i in 0..64 {
                if (b >> i) & 1 == 1 {
                    exp ^= (a as u128) << i;
                }
            }
            assert_eq!((lo, hi), (exp as u64, (exp >> 64) as u64));
        }
    }

    #[test]
    fn aes_product() {
        let r = AES_LIKE.mul(&[0x57], &[0x83]);
        assert_eq!(r, vec![0xc1]);
        assert!(poly::is_irreducible(&AES_LIKE));
        // x^8 + 1 = (x+1)^8 is reducible
        assert!(!poly::is_irreducible(&BinaryField::new(8, &[0])));
    }

    #[test]
    fn bytes_roundtrip() {
        let f = BinaryField::new(128, &[7, 2, 1, 0]);
        let bytes: Vec<u8> = (0..16).collect();
        let limbs = f.from_be_bytes(&bytes).unwrap();
        assert_eq!(limbs[0] & 0xff, 15);
        assert_eq!(f.to_be_bytes(&limbs), bytes);
        assert!(f.from_be_bytes(&bytes[1..]).is_none());
    }
}
