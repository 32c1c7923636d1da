//! IDX reader (the MNIST distribution format). All header fields are
//! big-endian `u32`s.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::{DataError, RawDataset};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxHeader {
    pub magic: u32,
    /// Dimension sizes; the first one is the item count.
    pub dims: Vec<u32>,
}

impl IdxHeader {
    pub fn items(&self) -> usize {
        self.dims.first().copied().unwrap_or(0) as usize
    }

    /// Bytes per item (product of the remaining dimensions).
    pub fn item_size(&self) -> usize {
        self.dims.iter().skip(1).map(|&d| d as usize).product()
    }
}

fn read_u32(reader: &mut impl Read, path: &Path, offset: u64) -> Result<u32, DataError> {
    let mut b = [0u8; 4];
    reader.read_exact(&mut b).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DataError::Truncated {
                path: path.into(),
                expected: offset + 4,
                found: offset,
            }
        } else {
            DataError::io(path, e)
        }
    })?;
    Ok(u32::from_be_bytes(b))
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| DataError::io(path, e))?,
    ))
}

fn read_header(
    reader: &mut impl Read,
    path: &Path,
    expected_magic: u32,
) -> Result<IdxHeader, DataError> {
    let magic = read_u32(reader, path, 0)?;
    if magic != expected_magic {
        return Err(DataError::WrongMagic {
            path: path.into(),
            expected: expected_magic,
            found: magic,
        });
    }
    let ndims = (magic & 0xFF) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(read_u32(reader, path, 4 + 4 * d as u64)?);
    }
    Ok(IdxHeader { magic, dims })
}

/// Reads only the header of an images (`0x803`) file.
pub fn read_idx_header(path: &Path) -> Result<IdxHeader, DataError> {
    read_header(&mut open(path)?, path, IDX_IMAGES_MAGIC)
}

fn read_payload(
    reader: &mut impl Read,
    path: &Path,
    header: &IdxHeader,
) -> Result<Vec<u8>, DataError> {
    let header_len = 4 + 4 * header.dims.len() as u64;
    let expected = header.items() * header.item_size();
    let mut data = Vec::with_capacity(expected);
    reader
        .take(expected as u64)
        .read_to_end(&mut data)
        .map_err(|e| DataError::io(path, e))?;
    if data.len() != expected {
        return Err(DataError::Truncated {
            path: path.into(),
            expected: header_len + expected as u64,
            found: header_len + data.len() as u64,
        });
    }
    Ok(data)
}

/// Returns `(header, pixels)`; pixels are row-major, one item after another.
pub fn read_idx_images(path: &Path) -> Result<(IdxHeader, Vec<u8>), DataError> {
    let mut r = open(path)?;
    let header = read_header(&mut r, path, IDX_IMAGES_MAGIC)?;
    let data = read_payload(&mut r, path, &header)?;
    Ok((header, data))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut r = open(path)?;
    let header = read_header(&mut r, path, IDX_LABELS_MAGIC)?;
    read_payload(&mut r, path, &header)
}

/// Loads an image file and its label file as one raw dataset.
pub fn load_idx(images: &Path, labels: &Path) -> Result<RawDataset<u8>, DataError> {
    let (header, values) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if labels.len() != header.items() {
        return Err(DataError::CountMismatch {
            images: header.items(),
            labels: labels.len(),
        });
    }
    Ok(RawDataset {
        feature_count: header.item_size(),
        values,
        labels: labels.into_iter().map(usize::from).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    fn images(n: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGES_MAGIC, n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(payload);
        b
    }

    fn labels(payload: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn loads_small_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(
            dir.path(),
            "img",
            &images(2, 2, 2, &[0, 1, 2, 3, 4, 5, 6, 7]),
        );
        let lab = write(dir.path(), "lab", &labels(&[3, 9]));
        let raw = load_idx(&img, &lab).unwrap();
        assert_eq!(raw.feature_count, 4);
        assert_eq!(raw.row(1), &[4, 5, 6, 7]);
        assert_eq!(raw.labels, vec![3, 9]);
    }

    #[test]
    fn label_file_with_image_magic_is_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "lab", &images(1, 1, 1, &[0]));
        assert!(matches!(
            read_idx_labels(&p),
            Err(DataError::WrongMagic {
                expected: IDX_LABELS_MAGIC,
                found: IDX_IMAGES_MAGIC,
                ..
            })
        ));
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "img", &images(2, 2, 2, &[0, 1, 2]));
        assert!(matches!(
            read_idx_images(&p),
            Err(DataError::Truncated {
                expected: 24,
                found: 19,
                ..
            })
        ));
        let p = write(dir.path(), "short", &IDX_IMAGES_MAGIC.to_be_bytes()[..3]);
        assert!(matches!(
            read_idx_images(&p),
            Err(DataError::Truncated { .. })
        ));
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img", &images(2, 1, 1, &[0, 1]));
        let lab = write(dir.path(), "lab", &labels(&[1, 2, 3]));
        assert!(matches!(
            load_idx(&img, &lab),
            Err(DataError::CountMismatch {
                images: 2,
                labels: 3
            })
        ));
    }
}
