//! Dataset ingestion, booleanization and bandwidth-driven packetization.

mod cache;
mod csv_reader;
mod idx;
mod packet;
pub mod synthetic;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use csv_reader::load_csv;
pub use idx::{
    load_idx, read_idx_header, read_idx_images, read_idx_labels, IdxHeader, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use packet::{depacketize, packetize, PacketPlan};
pub use synthetic::noisy_xor;

use std::path::PathBuf;

use thiserror::Error;

use crate::bits::BitVector;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: wrong magic 0x{found:08X}, expected 0x{expected:08X}")]
    WrongMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated, expected {expected} bytes but found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("sample {index} has {found} features, expected {expected}")]
    FeatureCount {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("label {label} of sample {index} is outside [0, {classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid packet plan: {0}")]
    InvalidPlan(String),
    #[error("expected {expected} bits, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{path}: I/O error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Raw (not yet booleanized) samples, row-major `samples x feature_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset<T> {
    pub feature_count: usize,
    pub values: Vec<T>,
    pub labels: Vec<usize>,
}

impl<T: Copy + Into<f64>> RawDataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.feature_count..(i + 1) * self.feature_count]
    }

    /// `(min, max)` over all values; `(0, 0)` when empty.
    pub fn value_range(&self) -> (f64, f64) {
        let mut it = self.values.iter().map(|&v| v.into());
        let first = match it.next() {
            Some(v) => v,
            None => return (0.0, 0.0),
        };
        it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// The threshold at `fraction` of the value range.
    pub fn threshold_at(&self, fraction: f64) -> f64 {
        let (lo, hi) = self.value_range();
        lo + fraction * (hi - lo)
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        if n < self.len() {
            self.labels.truncate(n);
            self.values.truncate(n * self.feature_count);
        }
    }
}

/// Fraction of the raw value range used when no threshold is given.
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.3;

/// Bit `i` of a sample is 1 iff raw value `i` is strictly above `threshold`.
pub fn booleanize_threshold<T: Copy + Into<f64>>(
    raw: &RawDataset<T>,
    threshold: f64,
    class_count: Option<usize>,
) -> Result<BooleanizedDataset, DataError> {
    let features = (0..raw.len())
        .map(|i| {
            let row = raw.row(i);
            let mut x = BitVector::zeros(raw.feature_count);
            for (j, &v) in row.iter().enumerate() {
                if v.into() > threshold {
                    x.set(j, true);
                }
            }
            x
        })
        .collect();
    let classes = class_count.unwrap_or_else(|| raw.labels.iter().max().map_or(1, |&m| m + 1));
    BooleanizedDataset::new(raw.feature_count, classes, features, raw.labels.clone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BooleanizedDataset {
    feature_count: usize,
    class_count: usize,
    features: Vec<BitVector>,
    labels: Vec<usize>,
}

impl BooleanizedDataset {
    pub fn new(
        feature_count: usize,
        class_count: usize,
        features: Vec<BitVector>,
        labels: Vec<usize>,
    ) -> Result<Self, DataError> {
        if features.len() != labels.len() {
            return Err(DataError::CountMismatch {
                images: features.len(),
                labels: labels.len(),
            });
        }
        for (index, x) in features.iter().enumerate() {
            if x.len() != feature_count {
                return Err(DataError::FeatureCount {
                    index,
                    expected: feature_count,
                    found: x.len(),
                });
            }
        }
        for (index, &label) in labels.iter().enumerate() {
            if label >= class_count {
                return Err(DataError::LabelOutOfRange {
                    index,
                    label,
                    classes: class_count,
                });
            }
        }
        Ok(Self {
            feature_count,
            class_count,
            features,
            labels,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[BitVector] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> (&BitVector, usize) {
        (&self.features[i], self.labels[i])
    }

    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            feature_count: self.feature_count,
            class_count: self.class_count,
            features: self.features[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}
