//! Source-dataset adapters behind a common trait.
//!
//! Each supported source is one strategy implementing [`DatasetAdapter`]:
//! it parses the source's native metadata layout into record drafts and
//! declares which selection rules apply. Adapters are registered by name
//! and picked at runtime from the CLI `--dataset` argument, so adding a
//! source means adding one implementation and one registry entry.

mod cbis;
mod store_source;
mod table;
mod tompei;
mod vindr;

pub use cbis::CbisAdapter;
pub use store_source::StoreAdapter;
pub use table::{normalize_header, read_table, CsvTable, RawRow, RowFailure};
pub use tompei::TompeiAdapter;
pub use vindr::VindrAdapter;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Dataset, UnifiedRecord};
use crate::selection::SelectionPolicy;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Csv {
        path: PathBuf,
        source: Box<csv::Error>,
    },
    #[error("{path} is missing required column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("store source at {path}: {detail}")]
    StoreSource { path: PathBuf, detail: String },
}

/// One record draft plus the path where its source image should live.
/// Existence is checked at harmonize time under the missing-image policy.
#[derive(Debug, Clone)]
pub struct Draft {
    pub record: UnifiedRecord,
    pub image_source: PathBuf,
}

/// Ingest accounting. Every row read is either a draft source, quarantined,
/// or excluded by a dataset flag; the counts must balance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdapterReport {
    pub rows_read: u64,
    pub rows_quarantined: u64,
    pub rows_excluded: u64,
    pub warnings: Vec<(PathBuf, u64, String)>,
}

impl AdapterReport {
    pub fn warn(&mut self, file: &Path, line: u64, message: impl Into<String>) {
        self.warnings.push((file.to_path_buf(), line, message.into()));
    }

    pub fn quarantine(&mut self, failure: RowFailure) {
        self.rows_quarantined += 1;
        self.warnings
            .push((failure.source_file, failure.line, failure.message));
    }
}

/// Where a source lives on disk plus optional per-file name overrides
/// (config keys documented per adapter).
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub root: PathBuf,
    pub file_overrides: BTreeMap<String, String>,
}

impl SourceSpec {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            file_overrides: BTreeMap::new(),
        }
    }

    /// Path of a named metadata file, honoring overrides.
    pub fn file(&self, key: &str, default: &str) -> PathBuf {
        match self.file_overrides.get(key) {
            Some(name) => self.root.join(name),
            None => self.root.join(default),
        }
    }
}

/// Everything an adapter run produces.
pub struct AdapterOutput {
    pub drafts: Vec<Draft>,
    pub report: AdapterReport,
    /// Dataset identity of the parsed content. Differs from the adapter
    /// name only for the store source, which re-ingests whatever dataset
    /// the store was built from.
    pub dataset: Dataset,
}

/// One interchangeable ingest strategy.
pub trait DatasetAdapter: Send + Sync {
    /// Registry name, also the CLI `--dataset` value.
    fn name(&self) -> &'static str;

    fn dataset(&self) -> Dataset;

    /// Parses the source metadata into drafts, stable order: source file,
    /// then line.
    fn parse(&self, source: &SourceSpec) -> Result<AdapterOutput, AdapterError>;

    /// Selection rules this source runs under.
    fn selection_policy(&self) -> SelectionPolicy;
}

static CBIS: CbisAdapter = CbisAdapter;
static TOMPEI: TompeiAdapter = TompeiAdapter;
static VINDR: VindrAdapter = VindrAdapter;
static STORE: StoreAdapter = StoreAdapter;

/// All registered adapters, in CLI listing order.
pub fn registry() -> [&'static dyn DatasetAdapter; 4] {
    [&CBIS, &TOMPEI, &VINDR, &STORE]
}

/// Looks an adapter up by registry name.
pub fn adapter_for(name: &str) -> Option<&'static dyn DatasetAdapter> {
    registry()
        .into_iter()
        .find(|a| a.name().eq_ignore_ascii_case(name.trim()))
}

/// Stable one-way encoding for patient identifiers: a dataset prefix plus a
/// truncated digest of the raw id. Joinable within and across runs, not
/// reversible.
pub fn encode_patient_id(dataset: Dataset, raw: &str) -> String {
    format!("{}_{}", dataset.as_str(), digest12(dataset.as_str(), raw))
}

/// Same scheme for image identifiers.
pub fn encode_image_id(dataset: Dataset, raw: &str) -> String {
    format!("img_{}", digest12(dataset.as_str(), raw))
}

fn digest12(prefix: &str, raw: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prefix.as_bytes());
    hasher.update(b":");
    hasher.update(raw.trim().as_bytes());
    let digest = hasher.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}
