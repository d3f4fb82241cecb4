//! Deterministic report emission.
//!
//! Every floating-point value is printed with 9 significant digits: CSV
//! cells use normalized scientific notation (`{:.8e}`), JSON numbers are
//! rounded to 9 significant digits before serialization. Files are written
//! to a temporary name and renamed into place, so an aborted command never
//! leaves a partial file behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// 9-significant-digit scientific form, e.g. `7.52429063e-2`.
pub fn sig9(x: f64) -> String {
    format!("{:.8e}", x)
}

/// Round to 9 significant digits (for JSON payloads).
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// A CSV table under construction: fixed header, sig9-formatted cells.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            buf: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        let rendered: Vec<String> = cells
            .iter()
            .map(|c| match c {
                CsvCell::Num(x) => sig9(*x),
                CsvCell::Int(k) => k.to_string(),
                CsvCell::Text(s) => s.clone(),
            })
            .collect();
        self.buf.push_str(&rendered.join(","));
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

pub enum CsvCell {
    Num(f64),
    Int(u64),
    Text(String),
}

/// One output file, rendered in memory before anything touches disk.
pub struct OutFile {
    pub name: String,
    pub content: String,
}

/// Write all files atomically into `dir` (created if needed): temp name
/// first, then rename.
pub fn persist(dir: &Path, files: &[OutFile]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create '{}': {e}", dir.display())))?;
    let mut written = Vec::with_capacity(files.len());
    for f in files {
        let final_path = dir.join(&f.name);
        let tmp_path = dir.join(format!("{}.tmp", f.name));
        fs::write(&tmp_path, &f.content)
            .map_err(|e| CliError::Config(format!("cannot write '{}': {e}", tmp_path.display())))?;
        fs::rename(&tmp_path, &final_path).map_err(|e| {
            CliError::Config(format!(
                "cannot rename into '{}': {e}",
                final_path.display()
            ))
        })?;
        written.push(final_path);
    }
    Ok(written)
}

/// Serialize a report struct to pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_has_nine_digits() {
        assert_eq!(sig9(25.0), "2.50000000e1");
        assert_eq!(sig9(-1.25e-9), "-1.25000000e-9");
        assert_eq!(sig9(761.9047619048), "7.61904762e2");
    }

    #[test]
    fn round9_idempotent() {
        let x = 0.07524290631234567;
        let r = round9(x);
        assert_eq!(round9(r), r);
        // Rounding to the 9th significant digit moves at most half its ulp.
        assert!((r - x).abs() <= 5e-9 * x);
        assert_eq!(round9(0.0), 0.0);
    }

    #[test]
    fn csv_shape() {
        let mut csv = Csv::new(&["a", "b"]);
        csv.row(&[CsvCell::Num(1.0), CsvCell::Int(2)]);
        assert_eq!(csv.into_string(), "a,b\n1.00000000e0,2\n");
    }
}
