//! CSV ingestion and artifact emission. All numeric output carries 17
//! significant digits so artifacts round-trip exactly; every table starts
//! with a `#` comment line embedding the configuration and seed that
//! produced it.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::{CliError, Result};

/// A parsed rectangular dataset with the rows that had to be dropped.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Predictor column names, in matrix column order.
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
    pub labels: Option<Vec<usize>>,
    /// (1-based data row, reason) for each rejected row.
    pub skipped: Vec<(usize, String)>,
}

/// CSV parsing options.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Column to split off as the response.
    pub y_column: Option<String>,
    /// Column to split off as integer group labels.
    pub label_column: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
            y_column: None,
            label_column: None,
        }
    }
}

fn column_index(names: &[String], wanted: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == wanted)
        .or_else(|| wanted.parse::<usize>().ok().filter(|&i| i < names.len()))
        .ok_or_else(|| CliError::usage(format!("column '{wanted}' not found")))
}

/// Loads a delimited numeric table. Rows with non-numeric or missing
/// cells are rejected and reported, not fatal; an empty result is.
pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::failure(format!("cannot read {}: {e}", path.display())))?;
    let mut names: Vec<String> = if options.has_header {
        reader
            .headers()
            .map_err(|e| CliError::failure(format!("bad header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect()
    } else {
        Vec::new()
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut skipped = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                skipped.push((row_no, format!("unreadable row: {e}")));
                continue;
            }
        };
        if names.is_empty() {
            names = (1..=record.len()).map(|j| format!("x{j}")).collect();
        }
        if record.len() != names.len() {
            skipped.push((row_no, format!("expected {} fields, found {}", names.len(), record.len())));
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, String> = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("non-numeric value '{}' in column {}", cell, names[j]))
            })
            .collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(reason) => skipped.push((row_no, reason)),
        }
    }
    if rows.is_empty() {
        return Err(CliError::failure(format!(
            "{}: no usable rows ({} rejected)",
            path.display(),
            skipped.len()
        )));
    }
    let mut y_idx = None;
    let mut label_idx = None;
    if let Some(col) = &options.y_column {
        y_idx = Some(column_index(&names, col)?);
    }
    if let Some(col) = &options.label_column {
        label_idx = Some(column_index(&names, col)?);
    }
    if y_idx.is_some() && y_idx == label_idx {
        return Err(CliError::usage("response and label columns coincide"));
    }
    let y = y_idx.map(|j| DVector::from_fn(rows.len(), |i, _| rows[i][j]));
    let labels = match label_idx {
        Some(j) => {
            let mut labels = Vec::with_capacity(rows.len());
            for row in &rows {
                let v = row[j];
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(CliError::failure(format!("label value {v} is not a group index")));
                }
                labels.push(v as usize);
            }
            Some(labels)
        }
        None => None,
    };
    let keep: Vec<usize> = (0..names.len())
        .filter(|j| Some(*j) != y_idx && Some(*j) != label_idx)
        .collect();
    let x = DMatrix::from_fn(rows.len(), keep.len(), |i, j| rows[i][keep[j]]);
    let names = keep.into_iter().map(|j| names[j].clone()).collect();
    Ok(Dataset {
        names,
        x,
        y,
        labels,
        skipped,
    })
}

/// 17 significant digits; parses back to the identical float.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a CSV table prefixed by one `#` comment line holding the
/// configuration (including the seed) that produced it.
pub fn write_table(
    path: &Path,
    config: &serde_json::Value,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# {config}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn integer_table_parses_to_matrix() {
        let f = write_temp("a,b\n1,2\n3,4\n5,6\n");
        let d = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert!(d.skipped.is_empty());
    }

    #[test]
    fn non_numeric_row_is_rejected_and_reported() {
        let f = write_temp("a,b\n1,2\n3,NA\n5,6\n");
        let d = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(d.x.nrows(), 2);
        assert_eq!(d.skipped.len(), 1);
        assert_eq!(d.skipped[0].0, 2);
        assert!(d.skipped[0].1.contains("NA"));
    }

    #[test]
    fn response_column_splits_off() {
        let f = write_temp("a,y,b\n1,9,2\n3,8,4\n");
        let options = CsvOptions {
            y_column: Some("y".into()),
            ..CsvOptions::default()
        };
        let d = load_csv(f.path(), &options).unwrap();
        assert_eq!(d.names, vec!["a", "b"]);
        assert_eq!(d.y.unwrap(), DVector::from_column_slice(&[9.0, 8.0]));
        assert_eq!(d.x.ncols(), 2);
    }

    #[test]
    fn written_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let values = [1.0 / 3.0, -2.7182818284590455e-10, 1e300];
        let rows: Vec<Vec<String>> = values.iter().map(|&v| vec![fmt17(v)]).collect();
        write_table(&path, &serde_json::json!({"seed": 0}), &["v"], &rows).unwrap();
        let d = load_csv(&path, &CsvOptions::default()).unwrap();
        for (i, &v) in values.iter().enumerate() {
            assert_eq!(d.x[(i, 0)], v);
        }
    }
}
