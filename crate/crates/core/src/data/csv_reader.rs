use std::path::Path;

use super::{DataError, RawDataset};

/// Reads one sample per row with the integer class label in the last column.
/// A first row that does not parse as numbers is treated as a header.
pub fn load_csv(path: &Path) -> Result<RawDataset<f32>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Parse {
            path: path.into(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut feature_count = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| DataError::Parse {
            path: path.into(),
            line,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(DataError::Parse {
                path: path.into(),
                line,
                message: "need at least one feature and a label".into(),
            });
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(DataError::Parse {
                    path: path.into(),
                    line,
                    message: e.to_string(),
                })
            }
        };
        let f = row.len() - 1;
        match feature_count {
            None => feature_count = Some(f),
            Some(expected) if expected != f => {
                return Err(DataError::FeatureCount {
                    index: labels.len(),
                    expected,
                    found: f,
                })
            }
            _ => {}
        }
        let label = row[f];
        if label < 0.0 || label.fract() != 0.0 {
            return Err(DataError::Parse {
                path: path.into(),
                line,
                message: format!("label {label} is not a non-negative integer"),
            });
        }
        values.extend(row[..f].iter().map(|&v| v as f32));
        labels.push(label as usize);
    }
    Ok(RawDataset {
        feature_count: feature_count.unwrap_or(0),
        values,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows_and_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,b,c,label\n0.5,1.0,-2,1\n3,4,5,0\n").unwrap();
        let raw = load_csv(&p).unwrap();
        assert_eq!(raw.feature_count, 3);
        assert_eq!(raw.labels, vec![1, 0]);
        assert_eq!(raw.row(0), &[0.5, 1.0, -2.0]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "1,2,0\n1,2,3,1\n").unwrap();
        assert!(matches!(
            load_csv(&p),
            Err(DataError::FeatureCount { .. }) | Err(DataError::Parse { .. })
        ));
    }

    #[test]
    fn fractional_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "1,2,0.5\n").unwrap();
        assert!(matches!(load_csv(&p), Err(DataError::Parse { .. })));
    }
}
