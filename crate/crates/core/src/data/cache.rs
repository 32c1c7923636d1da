//! Booleanized dataset cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TMBD"
//! 4       4     version (u32, currently 1)
//! 8       8     sample count n (u64)
//! 16      4     feature count F (u32)
//! 20      4     class count (u32)
//! 24      4n    labels (u32 each)
//! ...     n*B   samples, B = ceil(F/8) bytes each, feature i at bit i%8 of byte i/8
//! ```

use std::fs;
use std::path::Path;

use super::{BooleanizedDataset, DataError};
use crate::bits::BitVector;

pub const CACHE_MAGIC: [u8; 4] = *b"TMBD";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn write_cache(path: &Path, dataset: &BooleanizedDataset) -> Result<(), DataError> {
    let f = dataset.feature_count();
    let row = f.div_ceil(8);
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.len() * (4 + row));
    out.extend_from_slice(&CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    out.extend_from_slice(&(f as u32).to_le_bytes());
    out.extend_from_slice(&(dataset.class_count() as u32).to_le_bytes());
    for &l in dataset.labels() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for x in dataset.features() {
        let bytes: Vec<u8> = x.words().iter().flat_map(|w| w.to_le_bytes()).collect();
        out.extend_from_slice(&bytes[..row]);
    }
    fs::write(path, out).map_err(|e| DataError::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<BooleanizedDataset, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let truncated = |expected: usize| DataError::Truncated {
        path: path.into(),
        expected: expected as u64,
        found: bytes.len() as u64,
    };
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    if bytes[..4] != CACHE_MAGIC {
        return Err(DataError::WrongMagic {
            path: path.into(),
            expected: u32::from_be_bytes(CACHE_MAGIC),
            found: u32::from_be_bytes(bytes[..4].try_into().unwrap()),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CACHE_VERSION {
        return Err(DataError::Parse {
            path: path.into(),
            line: 0,
            message: format!("unsupported cache version {version}"),
        });
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let f = u32_at(16) as usize;
    let classes = u32_at(20) as usize;
    let row = f.div_ceil(8);
    let expected = HEADER_LEN + n * (4 + row);
    if bytes.len() != expected {
        return Err(truncated(expected));
    }
    let labels = (0..n)
        .map(|i| u32_at(HEADER_LEN + 4 * i) as usize)
        .collect();
    let base = HEADER_LEN + 4 * n;
    let features = (0..n)
        .map(|i| {
            let chunk = &bytes[base + i * row..base + (i + 1) * row];
            let words = chunk
                .chunks(8)
                .map(|c| {
                    let mut b = [0u8; 8];
                    b[..c.len()].copy_from_slice(c);
                    u64::from_le_bytes(b)
                })
                .collect();
            BitVector::from_words(words, f)
        })
        .collect();
    BooleanizedDataset::new(f, classes, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::noisy_xor;

    #[test]
    fn round_trip() {
        let d = noisy_xor(37, 11, 0.0, 5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tmbd");
        write_cache(&p, &d).unwrap();
        let raw = fs::read(&p).unwrap();
        assert_eq!(&raw[..4], b"TMBD");
        assert_eq!(raw.len(), 24 + 37 * (4 + 2));
        assert_eq!(read_cache(&p).unwrap(), d);
    }

    #[test]
    fn rejects_damage() {
        let d = noisy_xor(4, 3, 0.0, 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tmbd");
        write_cache(&p, &d).unwrap();
        let mut raw = fs::read(&p).unwrap();
        raw.pop();
        fs::write(&p, &raw).unwrap();
        assert!(matches!(read_cache(&p), Err(DataError::Truncated { .. })));
        raw[0] = b'X';
        fs::write(&p, &raw).unwrap();
        assert!(matches!(read_cache(&p), Err(DataError::WrongMagic { .. })));
    }
}
