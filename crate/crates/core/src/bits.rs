//! Bitset spin configurations. Bit `i` set means spin `i` is down (σ = −1).

use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bits {
    n: usize,
    words: Vec<u64>,
}

pub fn n_words(n: usize) -> usize {
    n.div_ceil(64)
}

impl Bits {
    pub fn zeros(n: usize) -> Self {
        Bits { n, words: vec![0; n_words(n)] }
    }

    pub fn from_indices(n: usize, idx: &[usize]) -> Self {
        let mut b = Bits::zeros(n);
        for &i in idx {
            b.set(i, true);
        }
        b
    }

    /// Integer encoding for `n <= 64`: bit `i` of `x` is spin `i`.
    pub fn from_u64(n: usize, x: u64) -> Self {
        let mut b = Bits::zeros(n);
        if n > 0 {
            b.words[0] = x;
            b.clear_tail();
        }
        b
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        let mut b = Bits::zeros(spins.len());
        for (i, &s) in spins.iter().enumerate() {
            if s < 0 {
                b.set(i, true);
            }
        }
        b
    }

    pub fn from_words(n: usize, words: &[u64]) -> Self {
        let mut b = Bits { n, words: words.to_vec() };
        b.clear_tail();
        b
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut b = Bits::zeros(n);
        for w in b.words.iter_mut() {
            *w = rng.random();
        }
        b.clear_tail();
        b
    }

    fn clear_tail(&mut self) {
        let r = self.n % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn to_u64(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= m;
        } else {
            self.words[i >> 6] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn xor_assign(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        let mut r = self.clone();
        r.xor_assign(other);
        r
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and_count(&self, other: &Bits) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Parity of the overlap: true when odd.
    #[inline]
    pub fn and_parity(&self, other: &Bits) -> bool {
        and_parity(&self.words, &other.words)
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.get(i)).collect()
    }

    pub fn spin(&self, i: usize) -> i8 {
        if self.get(i) {
            -1
        } else {
            1
        }
    }

    pub fn to_spins(&self) -> Vec<i8> {
        (0..self.n).map(|i| self.spin(i)).collect()
    }

    pub fn write_spins(&self, out: &mut [i8]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.spin(i);
        }
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for w in self.words.iter().rev() {
            s.push_str(&format!("{w:016x}"));
        }
        s
    }

    pub fn from_hex(n: usize, s: &str) -> Option<Bits> {
        let nw = n_words(n);
        if s.len() != 16 * nw {
            return None;
        }
        let mut words = vec![0u64; nw];
        for (k, w) in words.iter_mut().rev().enumerate() {
            *w = u64::from_str_radix(&s[16 * k..16 * (k + 1)], 16).ok()?;
        }
        Some(Bits::from_words(n, &words))
    }
}

#[inline]
pub fn and_parity(a: &[u64], b: &[u64]) -> bool {
    let mut acc = 0u64;
    for (x, y) in a.iter().zip(b) {
        acc ^= x & y;
    }
    acc.count_ones() & 1 == 1
}

/// Apply a site permutation to a configuration: bit `perm[i]` of the result is bit `i`.
pub fn permute(b: &Bits, perm: &[usize]) -> Bits {
    let mut r = Bits::zeros(b.len());
    for i in 0..b.len() {
        if b.get(i) {
            r.set(perm[i], true);
        }
    }
    r
}

pub fn permute_u64(x: u64, perm: &[usize]) -> u64 {
    let mut r = 0u64;
    let mut y = x;
    while y != 0 {
        let i = y.trailing_zeros() as usize;
        r |= 1u64 << perm[i];
        y &= y - 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip() {
        let b = Bits::from_indices(130, &[0, 5, 64, 129]);
        let h = b.to_hex();
        assert_eq!(Bits::from_hex(130, &h).unwrap(), b);
    }

    #[test]
    fn spins_roundtrip() {
        let b = Bits::from_u64(10, 0b1010011);
        assert_eq!(Bits::from_spins(&b.to_spins()), b);
        assert_eq!(b.spin(0), -1);
        assert_eq!(b.spin(2), 1);
    }

    #[test]
    fn parity() {
        let a = Bits::from_indices(70, &[1, 2, 66]);
        let b = Bits::from_indices(70, &[2, 66, 69]);
        assert!(!a.and_parity(&b));
        assert_eq!(a.and_count(&b), 2);
    }

    #[test]
    fn permute_matches_u64() {
        let perm = vec![3, 0, 1, 2];
        let b = Bits::from_u64(4, 0b0011);
        assert_eq!(permute(&b, &perm).to_u64(), permute_u64(0b0011, &perm));
    }
}
