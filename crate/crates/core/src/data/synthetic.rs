//! Small generated datasets for smoke tests.

use super::BooleanizedDataset;
use crate::bits::BitVector;
use crate::tm::rng::KeyedStream;

/// Two informative bits (features 0 and 1, label = x0 XOR x1) followed by
/// `noise_features` uniformly random bits. Each label is flipped with
/// probability `label_noise`.
pub fn noisy_xor(
    samples: usize,
    noise_features: usize,
    label_noise: f64,
    seed: u64,
) -> BooleanizedDataset {
    let f = 2 + noise_features;
    let mut features = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let s = KeyedStream::new(seed, &[0x0058_4F52, i as u64]);
        let mut x = BitVector::zeros(f);
        for j in 0..f {
            x.set(j, s.u64_at(j as u64) >> 63 == 1);
        }
        let mut y = usize::from(x.get(0) ^ x.get(1));
        if s.f64_at(f as u64) < label_noise {
            y ^= 1;
        }
        features.push(x);
        labels.push(y);
    }
    BooleanizedDataset::new(f, 2, features, labels).expect("generated data is well formed")
}
