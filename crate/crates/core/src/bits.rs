//! Packed bit vectors used for feature vectors, literal vectors, clause
//! registers and stream packets.

use std::fmt;

/// Fixed-length bit vector packed LSB-first into `u64` words.
///
/// Bit `i` lives in word `i / 64` at position `i % 64`. Bits past `len` are
/// always zero so word-level comparisons and hashing stay well defined.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            len,
            words: vec![u64::MAX; words_for(len)],
        };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Builds a vector from the low `len` bits of `value` (bit 0 = index 0).
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 holds at most 64 bits");
        let mut v = Self::zeros(len);
        if len > 0 {
            v.words[0] = value;
            v.clear_tail();
        }
        v
    }

    /// Builds a vector from raw words; bits past `len` are discarded.
    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert_eq!(
            words.len(),
            words_for(len),
            "word count does not match length"
        );
        let mut v = Self { len, words };
        v.clear_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let tz = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * 64 + tz)
                }
            })
        })
    }

    /// Copies bits `[start, start + len)` into a new vector; positions past
    /// the end of `self` read as zero.
    pub fn slice(&self, start: usize, len: usize) -> BitVector {
        let mut out = BitVector::zeros(len);
        for i in 0..len {
            let src = start + i;
            if src < self.len && self.get(src) {
                out.set(i, true);
            }
        }
        out
    }

    /// Writes `src` into `self` starting at bit `start`; bits of `src` that
    /// would land past the end are dropped.
    pub fn write_at(&mut self, start: usize, src: &BitVector) {
        for i in 0..src.len() {
            let dst = start + i;
            if dst >= self.len {
                break;
            }
            self.set(dst, src.get(i));
        }
    }

    /// Uppercase hex, most significant nibble first, `ceil(len / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4).max(1);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let mut nibble = 0u8;
            for b in 0..4 {
                let i = d * 4 + b;
                if i < self.len && self.get(i) {
                    nibble |= 1 << b;
                }
            }
            s.push(
                char::from_digit(nibble as u32, 16)
                    .unwrap()
                    .to_ascii_uppercase(),
            );
        }
        s
    }

    /// Parses the format produced by [`BitVector::to_hex`].
    pub fn from_hex(hex: &str, len: usize) -> Option<BitVector> {
        let mut v = BitVector::zeros(len);
        for (d, c) in hex.trim().chars().rev().enumerate() {
            let nibble = c.to_digit(16)?;
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let i = d * 4 + b;
                    if i >= len {
                        return None;
                    }
                    v.set(i, true);
                }
            }
        }
        Some(v)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitVector {
    /// Index 0 is printed first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector[{}](", self.len)?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_clears_tail_bits() {
        let v = BitVector::ones(70);
        assert_eq!(v.count_ones(), 70);
        assert_eq!(v.words()[1], (1 << 6) - 1);
    }

    #[test]
    fn iter_ones_matches_get() {
        let v = BitVector::from_bools(&[true, false, false, true, true]);
        assert_eq!(v.iter_ones().collect::<Vec<_>>(), vec![0, 3, 4]);
    }

    #[test]
    fn hex_is_msb_first() {
        let v = BitVector::from_u64(0b1011_0001, 8);
        assert_eq!(v.to_hex(), "B1");
        assert_eq!(BitVector::from_hex("B1", 8), Some(v));
        assert_eq!(BitVector::from_u64(0b1, 5).to_hex(), "01");
    }

    #[test]
    fn from_hex_rejects_overflowing_digits() {
        assert_eq!(BitVector::from_hex("1F", 4), None);
    }

    #[test]
    fn slice_pads_with_zero() {
        let v = BitVector::from_u64(0b111, 3);
        assert_eq!(v.slice(1, 4), BitVector::from_u64(0b0011, 4));
    }
}
