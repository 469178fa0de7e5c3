//! CSV input and output, and all-or-nothing output directories.
//!
//! Data files hold one point per row (`N x D`); the library works with one
//! point per column, so reading transposes once at the boundary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fms::bench::format_float;
use fms::linalg::DataMatrix;

use crate::error::{CliError, CliResult};

/// Reads an `N x D` CSV of points. A first row in which no cell parses as a
/// number is taken as a header and skipped.
pub fn read_points(path: &Path) -> CliResult<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(path, e.to_string()))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if index == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                CliError::input(
                    path,
                    format!("row {line}, column {}: '{cell}' is not a number", col + 1),
                )
            })?;
            if !value.is_finite() {
                return Err(CliError::input(
                    path,
                    format!("row {line}, column {}: non-finite value '{cell}'", col + 1),
                ));
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::input(
                    path,
                    format!("row {line} has {} columns, expected {w}", row.len()),
                ))
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    Ok(DataMatrix::from_points(&rows)?)
}

/// Formats rows of numbers as CSV with 17 significant digits.
pub fn numeric_csv<I, R>(rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_float).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `N x D` text of a column-major data matrix.
pub fn points_csv(x: &DataMatrix) -> String {
    numeric_csv(
        x.as_matrix()
            .column_iter()
            .map(|c| c.iter().copied().collect::<Vec<_>>()),
    )
}

/// Files staged in a hidden temporary name and renamed into place only when
/// [`OutputDir::commit`] runs, so a failed command leaves no partial outputs.
pub struct OutputDir {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn stage(&mut self, name: &str, contents: &[u8]) -> CliResult<PathBuf> {
        let target = self.path(name);
        let tmp = self.dir.join(format!(".{name}.tmp-{}", std::process::id()));
        let mut file = fs::File::create(&tmp).map_err(|e| CliError::output(&tmp, e))?;
        file.write_all(contents)
            .and_then(|_| file.sync_all())
            .map_err(|e| CliError::output(&tmp, e))?;
        self.staged.push((tmp, target.clone()));
        Ok(target)
    }

    pub fn commit(mut self) -> CliResult<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            fs::rename(&tmp, &target).map_err(|e| CliError::output(&target, e))?;
            written.push(target);
        }
        Ok(written)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}
