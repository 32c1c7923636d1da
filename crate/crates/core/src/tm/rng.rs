//! Counter-based random numbers for training.
//!
//! Every random draw is a pure function of `(seed, key parts, counter)`, so
//! the order in which clauses are updated (or the number of worker threads
//! doing it) can never change the outcome of a training run.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A random stream identified by a key; value `i` of the stream is
/// independent of every other value and of how many were drawn before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyedStream {
    key: u64,
}

impl KeyedStream {
    pub fn new(seed: u64, parts: &[u64]) -> Self {
        let mut key = mix(seed ^ 0x005E_ED0F_7E57_11A0);
        for (i, &p) in parts.iter().enumerate() {
            key = mix(key ^ p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
        }
        Self { key }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix(self
            .key
            .wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, bound)`; `bound` must be non-zero.
    #[inline]
    pub fn below(&self, counter: u64, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.u64_at(counter) as u128 * bound as u128) >> 64) as u64
    }

    /// Two independent 32-bit draws per counter value; draw `i` uses the low
    /// half of value `base + i / 2` when `i` is even and the high half
    /// otherwise.
    #[inline]
    pub fn u32_pair(&self, base: u64, i: usize) -> u32 {
        let v = self.u64_at(base + (i >> 1) as u64);
        if i & 1 == 0 {
            v as u32
        } else {
            (v >> 32) as u32
        }
    }
}

/// Deterministic Fisher-Yates permutation of `0..n`.
pub fn permutation(n: usize, stream: KeyedStream) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = stream.below(i as u64, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_pure_function_of_key_and_counter() {
        let a = KeyedStream::new(7, &[1, 2, 3]);
        let b = KeyedStream::new(7, &[1, 2, 3]);
        assert_eq!(a.u64_at(5), b.u64_at(5));
        assert_ne!(a.u64_at(5), a.u64_at(6));
        assert_ne!(a, KeyedStream::new(7, &[1, 3, 2]));
        assert_ne!(a, KeyedStream::new(8, &[1, 2, 3]));
    }

    #[test]
    fn f64_mean_is_near_half() {
        let s = KeyedStream::new(1, &[]);
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| s.f64_at(i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = permutation(1000, KeyedStream::new(3, &[9]));
        assert_ne!(p, (0..1000).collect::<Vec<_>>());
        p.sort_unstable();
        assert_eq!(p, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn below_stays_in_bounds() {
        let s = KeyedStream::new(11, &[0]);
        let mut seen = [false; 7];
        for i in 0..1000 {
            let v = s.below(i, 7) as usize;
            seen[v] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
