//! CSV ingestion and atomic file output.

use std::fs;
use std::path::Path;

use crate::CliError;

/// A fully numeric data table read from CSV.
///
/// Rows with missing cells (empty fields, short records, or non-finite
/// numbers) are dropped and counted; columns must be non-constant so the
/// rank transform is informative.
pub struct Dataset {
    pub names: Vec<String>,
    /// Column-major values, one inner vector per variable.
    pub columns: Vec<Vec<f64>>,
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }
}

/// Read a comma-separated, header-first, UTF-8 data file.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;

    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: bad header row: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let d = names.len();
    if d < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least 2 columns, found {d}",
            path.display()
        )));
    }
    if names.iter().any(String::is_empty) {
        return Err(CliError::Data(format!("{}: empty column name in header", path.display())));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut dropped = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // header is line 1
        let record =
            record.map_err(|e| CliError::Data(format!("{}: line {row}: {e}", path.display())))?;
        if record.len() != d {
            dropped += 1;
            continue;
        }
        let mut values = Vec::with_capacity(d);
        let mut missing = false;
        for (j, field) in record.iter().enumerate() {
            if field.is_empty() {
                missing = true;
                break;
            }
            let value: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {row}, column '{}': '{field}' is not a number",
                    path.display(),
                    names[j]
                ))
            })?;
            if !value.is_finite() {
                missing = true;
                break;
            }
            values.push(value);
        }
        if missing {
            dropped += 1;
            continue;
        }
        for (j, v) in values.into_iter().enumerate() {
            columns[j].push(v);
        }
    }

    if dropped > 0 {
        eprintln!("note: dropped {dropped} row(s) with missing values from {}", path.display());
    }
    let n = columns[0].len();
    if n < 2 {
        return Err(CliError::Data(format!(
            "{}: only {n} complete row(s) of data",
            path.display()
        )));
    }
    for (j, col) in columns.iter().enumerate() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == hi {
            return Err(CliError::Data(format!(
                "{}: column '{}' is constant; its ranks carry no information",
                path.display(),
                names[j]
            )));
        }
    }
    Ok(Dataset { names, columns, dropped_rows: dropped })
}

/// Write via a temporary sibling and rename, so a crash never leaves a
/// partial file at the target path.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Data(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Data(format!("cannot move {} into place: {e}", tmp.display())))?;
    Ok(())
}

/// Render column-major samples as CSV with shortest-round-trip numbers.
pub fn csv_from_columns(names: &[String], columns: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    let n = columns.first().map_or(0, Vec::len);
    for t in 0..n {
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", col[t]));
        }
        out.push('\n');
    }
    out
}
