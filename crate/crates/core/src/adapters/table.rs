//! CSV ingestion shared by the adapters: header normalization, ordered raw
//! rows, and quarantine bookkeeping for rows that cannot be parsed.

use std::path::{Path, PathBuf};

use crate::adapters::AdapterError;
use crate::model::Dataset;

/// One source row, column order preserved, keys normalized.
#[derive(Debug, Clone)]
pub struct RawRow {
    pub dataset: Dataset,
    pub source_fields: Vec<(String, String)>,
    pub source_file: PathBuf,
    /// 1-based data line number (header excluded).
    pub line: u64,
}

impl RawRow {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.source_fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.trim())
    }

    /// First non-empty value among alias keys.
    pub fn get_any(&self, keys: &[&str]) -> Option<&str> {
        keys.iter().find_map(|k| self.get(k).filter(|v| !v.is_empty()))
    }

    pub fn require(&self, key: &str) -> Result<&str, RowFailure> {
        match self.get(key) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(RowFailure::new(self, format!("missing value for column {key:?}"))),
        }
    }
}

/// Why a row was quarantined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFailure {
    pub source_file: PathBuf,
    pub line: u64,
    pub message: String,
}

impl RowFailure {
    pub fn new(row: &RawRow, message: impl Into<String>) -> Self {
        Self {
            source_file: row.source_file.clone(),
            line: row.line,
            message: message.into(),
        }
    }
}

/// Lowercases, trims, and collapses whitespace/hyphen runs to `_` so the
/// datasets' header spelling variants resolve to one canonical key. Renamed
/// columns still fail loudly.
pub fn normalize_header(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_sep = false;
    for c in raw.trim().chars() {
        if c.is_whitespace() || c == '-' {
            if !last_sep && !out.is_empty() {
                out.push('_');
                last_sep = true;
            }
        } else {
            out.push(c.to_ascii_lowercase());
            last_sep = false;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// A parsed CSV file: normalized headers plus rows; rows with the wrong
/// field count are returned as failures for quarantine accounting.
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Result<RawRow, RowFailure>>,
}

impl CsvTable {
    /// Errors with the missing column name when a required header is absent.
    pub fn require_columns(&self, path: &Path, columns: &[&str]) -> Result<(), AdapterError> {
        for col in columns {
            if !self.headers.iter().any(|h| h == col) {
                return Err(AdapterError::MissingColumn {
                    path: path.to_path_buf(),
                    column: (*col).to_string(),
                });
            }
        }
        Ok(())
    }

    /// True when any of the alias spellings is present.
    pub fn has_any_column(&self, columns: &[&str]) -> bool {
        columns.iter().any(|c| self.headers.iter().any(|h| h == c))
    }
}

pub fn read_table(path: &Path, dataset: Dataset) -> Result<CsvTable, AdapterError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| AdapterError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| AdapterError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?
        .iter()
        .map(normalize_header)
        .collect();

    let mut rows = Vec::new();
    for (idx, result) in reader.records().enumerate() {
        let line = idx as u64 + 1;
        match result {
            Ok(record) => {
                if record.len() != headers.len() {
                    rows.push(Err(RowFailure {
                        source_file: path.to_path_buf(),
                        line,
                        message: format!(
                            "expected {} fields, found {}",
                            headers.len(),
                            record.len()
                        ),
                    }));
                    continue;
                }
                let source_fields = headers
                    .iter()
                    .cloned()
                    .zip(record.iter().map(|v| v.to_string()))
                    .collect();
                rows.push(Ok(RawRow {
                    dataset,
                    source_fields,
                    source_file: path.to_path_buf(),
                    line,
                }));
            }
            Err(err) => rows.push(Err(RowFailure {
                source_file: path.to_path_buf(),
                line,
                message: err.to_string(),
            })),
        }
    }
    Ok(CsvTable { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_normalization_variants() {
        assert_eq!(normalize_header("left or right breast"), "left_or_right_breast");
        assert_eq!(normalize_header("breast_density"), "breast_density");
        assert_eq!(normalize_header("breast density"), "breast_density");
        assert_eq!(normalize_header("BI-RADS"), "bi_rads");
        assert_eq!(normalize_header("  Image View "), "image_view");
    }

    #[test]
    fn short_rows_become_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n4,5\n6,7,8\n").unwrap();
        let table = read_table(&path, Dataset::Cbis).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows[0].is_ok());
        assert!(table.rows[1].is_err());
        assert!(table.rows[2].is_ok());
        let row = table.rows[2].as_ref().unwrap();
        assert_eq!(row.line, 3);
        assert_eq!(row.get("b"), Some("7"));
    }
}
