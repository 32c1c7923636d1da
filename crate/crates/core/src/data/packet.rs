use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::bits::BitVector;

/// How a datapoint of `features` bits is split into `bandwidth`-bit words.
///
/// Feature `i` travels in bit `i % bandwidth` of word `i / bandwidth`; the
/// high bits of the last word are zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketPlan {
    features: usize,
    bandwidth: usize,
}

impl PacketPlan {
    pub fn new(features: usize, bandwidth: usize) -> Result<Self, DataError> {
        if features == 0 {
            return Err(DataError::InvalidPlan(
                "feature count must be at least 1".into(),
            ));
        }
        if bandwidth == 0 {
            return Err(DataError::InvalidPlan(
                "bandwidth must be at least 1 bit".into(),
            ));
        }
        Ok(Self {
            features,
            bandwidth,
        })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn packet_count(&self) -> usize {
        self.features.div_ceil(self.bandwidth)
    }

    pub fn pad_bits(&self) -> usize {
        self.packet_count() * self.bandwidth - self.features
    }

    pub fn feature_range(&self, packet: usize) -> Range<usize> {
        let start = packet * self.bandwidth;
        start.min(self.features)..((packet + 1) * self.bandwidth).min(self.features)
    }

    pub fn feature_ranges(&self) -> Vec<Range<usize>> {
        (0..self.packet_count())
            .map(|p| self.feature_range(p))
            .collect()
    }

    /// `(packet, bit within the packet)` carrying feature `i`.
    pub fn locate(&self, feature: usize) -> (usize, usize) {
        (feature / self.bandwidth, feature % self.bandwidth)
    }
}

pub fn packetize(x: &BitVector, plan: &PacketPlan) -> Result<Vec<BitVector>, DataError> {
    if x.len() != plan.features() {
        return Err(DataError::LengthMismatch {
            expected: plan.features(),
            found: x.len(),
        });
    }
    Ok((0..plan.packet_count())
        .map(|p| {
            let r = plan.feature_range(p);
            let mut word = BitVector::zeros(plan.bandwidth());
            word.write_at(0, &x.slice(r.start, r.len()));
            word
        })
        .collect())
}

pub fn depacketize(words: &[BitVector], plan: &PacketPlan) -> Result<BitVector, DataError> {
    if words.len() != plan.packet_count() {
        return Err(DataError::LengthMismatch {
            expected: plan.packet_count(),
            found: words.len(),
        });
    }
    let mut x = BitVector::zeros(plan.features());
    for (p, w) in words.iter().enumerate() {
        if w.len() != plan.bandwidth() {
            return Err(DataError::LengthMismatch {
                expected: plan.bandwidth(),
                found: w.len(),
            });
        }
        let r = plan.feature_range(p);
        x.write_at(r.start, &w.slice(0, r.len()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Written like a binary literal: the rightmost character is feature 0.
    fn msb_first(s: &str) -> BitVector {
        let bits: Vec<bool> = s.chars().rev().map(|c| c == '1').collect();
        BitVector::from_bools(&bits)
    }

    #[test]
    fn plan_examples() {
        let p = PacketPlan::new(784, 64).unwrap();
        assert_eq!((p.packet_count(), p.pad_bits()), (13, 48));
        let p = PacketPlan::new(64, 64).unwrap();
        assert_eq!((p.packet_count(), p.pad_bits()), (1, 0));
        let p = PacketPlan::new(377, 64).unwrap();
        assert_eq!((p.packet_count(), p.pad_bits()), (6, 7));
        assert_eq!(p.feature_range(5), 320..377);
        assert!(PacketPlan::new(0, 64).is_err());
        assert!(PacketPlan::new(8, 0).is_err());
    }

    #[test]
    fn packetize_examples() {
        let plan = PacketPlan::new(4, 4).unwrap();
        let words = packetize(&msb_first("1011"), &plan).unwrap();
        assert_eq!(words[0].words()[0], 0b1011);

        let plan = PacketPlan::new(5, 4).unwrap();
        let words = packetize(&msb_first("10111"), &plan).unwrap();
        assert_eq!(
            words.iter().map(|w| w.words()[0]).collect::<Vec<_>>(),
            vec![0b0111, 0b0001]
        );
    }

    #[test]
    fn length_mismatch() {
        let plan = PacketPlan::new(5, 4).unwrap();
        assert!(matches!(
            packetize(&BitVector::zeros(6), &plan),
            Err(DataError::LengthMismatch {
                expected: 5,
                found: 6
            })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(f in 1usize..300, w in 1usize..130, seed in any::<u64>()) {
            let plan = PacketPlan::new(f, w).unwrap();
            let mut x = BitVector::zeros(f);
            let mut s = seed;
            for i in 0..f {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                x.set(i, s >> 63 == 1);
            }
            let words = packetize(&x, &plan).unwrap();
            prop_assert_eq!(words.len(), plan.packet_count());
            prop_assert_eq!(plan.packet_count() * w - plan.pad_bits(), f);
            let last = words.last().unwrap();
            let used = f - (plan.packet_count() - 1) * w;
            for b in used..w {
                prop_assert!(!last.get(b), "padding bit {} is set", b);
            }
            prop_assert_eq!(depacketize(&words, &plan).unwrap(), x);
        }

        #[test]
        fn ranges_partition_features(f in 1usize..2000, w in 1usize..200) {
            let plan = PacketPlan::new(f, w).unwrap();
            let mut next = 0;
            for r in plan.feature_ranges() {
                prop_assert_eq!(r.start, next);
                prop_assert!(!r.is_empty());
                next = r.end;
            }
            prop_assert_eq!(next, f);
        }
    }
}
