//! Harmonized per-image records, breast-level exams and record validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    BiRadsScore, Dataset, DensityCategory, Diagnosis, FindingSet, Laterality, Split, ViewPosition,
};

/// Identity of one stored image: patient, breast side, view.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImageKey {
    pub patient_id: String,
    pub laterality: Laterality,
    pub view: ViewPosition,
}

impl ImageKey {
    pub fn new(patient_id: impl Into<String>, laterality: Laterality, view: ViewPosition) -> Self {
        Self {
            patient_id: patient_id.into(),
            laterality,
            view,
        }
    }

    /// Canonical image file name inside the patient folder.
    pub fn file_name(&self) -> String {
        format!("{}_{}.png", self.laterality, self.view)
    }
}

impl fmt::Display for ImageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}_{}", self.patient_id, self.laterality, self.view)
    }
}

/// One breast-side image's harmonized metadata row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedRecord {
    pub dataset: Dataset,
    pub patient_id: String,
    pub image_id: Option<String>,
    pub laterality: Laterality,
    pub view: ViewPosition,
    pub age: Option<u32>,
    pub density: Option<DensityCategory>,
    pub diagnosis: Diagnosis,
    pub birads: Option<BiRadsScore>,
    pub findings: FindingSet,
    pub split: Split,
    pub raw_folder: String,
    pub processed_path: String,
}

impl UnifiedRecord {
    pub fn key(&self) -> ImageKey {
        ImageKey::new(self.patient_id.clone(), self.laterality, self.view)
    }

    /// Canonical relative path of the processed image for this record.
    pub fn canonical_processed_path(&self) -> String {
        format!("{}/{}_{}.png", self.patient_id, self.laterality, self.view)
    }

    /// Sort key fixing the order of rows in every emitted table.
    pub fn sort_key(&self) -> (String, Laterality, ViewPosition, Option<String>) {
        (
            self.patient_id.clone(),
            self.laterality,
            self.view,
            self.image_id.clone(),
        )
    }
}

/// A named invariant violation on a record or store entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub detail: String,
}

impl Violation {
    pub fn new(
        field: impl Into<String>,
        rule: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.field, self.rule, self.detail)
    }
}

/// Checks every record-level invariant. Validation reports, it never aborts;
/// an empty list means the record is clean.
pub fn validate_record(record: &UnifiedRecord) -> Vec<Violation> {
    let mut out = Vec::new();

    for (field, rule) in record.findings.descriptor_violations() {
        out.push(Violation::new(
            field,
            rule,
            format!("{} set while its presence flag is unset", field),
        ));
    }

    match (record.dataset, record.split) {
        (Dataset::Vindr, Split::Unsplit) => out.push(Violation::new(
            "split",
            "vindr-requires-split",
            "VinDr records must retain their train/test split",
        )),
        (Dataset::Cbis | Dataset::Tompei, Split::Train | Split::Test) => out.push(Violation::new(
            "split",
            "predefined-split-discarded",
            format!(
                "{} records must be unsplit, found {}",
                record.dataset, record.split
            ),
        )),
        _ => {}
    }

    if let Some(birads) = record.birads {
        if !birads.is_harmonized() {
            out.push(Violation::new(
                "birads",
                "birads-out-of-harmonized-range",
                format!("harmonized records carry 1-5, found {}", birads),
            ));
        }
    }

    if record.diagnosis == Diagnosis::Unknown && record.dataset != Dataset::Vindr {
        out.push(Violation::new(
            "diagnosis",
            "unknown-diagnosis-not-allowed",
            format!(
                "Unknown is reserved for datasets without biopsy labels, found on {}",
                record.dataset
            ),
        ));
    }

    if !record.processed_path.is_empty()
        && record.processed_path != record.canonical_processed_path()
    {
        out.push(Violation::new(
            "processed_path",
            "laterality-view-naming",
            format!(
                "expected {:?}, found {:?}",
                record.canonical_processed_path(),
                record.processed_path
            ),
        ));
    }

    out
}

/// All views of one breast of one patient; the unit of case selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exam {
    pub patient_id: String,
    pub laterality: Laterality,
    records: BTreeMap<ViewPosition, UnifiedRecord>,
}

impl Exam {
    pub fn new(patient_id: impl Into<String>, laterality: Laterality) -> Self {
        Self {
            patient_id: patient_id.into(),
            laterality,
            records: BTreeMap::new(),
        }
    }

    pub fn key(&self) -> (String, Laterality) {
        (self.patient_id.clone(), self.laterality)
    }

    /// Inserts a record; at most one record per view.
    pub fn insert(&mut self, record: UnifiedRecord) -> Result<(), UnifiedRecord> {
        if self.records.contains_key(&record.view) {
            return Err(record);
        }
        self.records.insert(record.view, record);
        Ok(())
    }

    pub fn record(&self, view: ViewPosition) -> Option<&UnifiedRecord> {
        self.records.get(&view)
    }

    pub fn record_mut(&mut self, view: ViewPosition) -> Option<&mut UnifiedRecord> {
        self.records.get_mut(&view)
    }

    pub fn records(&self) -> impl Iterator<Item = &UnifiedRecord> {
        self.records.values()
    }

    pub fn views(&self) -> impl Iterator<Item = ViewPosition> + '_ {
        self.records.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_view(&self, view: ViewPosition) -> bool {
        self.records.contains_key(&view)
    }

    /// Exam-level diagnosis, defined only when all member records agree.
    pub fn diagnosis(&self) -> Option<Diagnosis> {
        agreeing(self.records.values().map(|r| r.diagnosis))
    }

    /// Exam-level assessment, defined only when all member records agree.
    pub fn birads(&self) -> Option<BiRadsScore> {
        agreeing(self.records.values().map(|r| r.birads)).flatten()
    }

    pub fn into_records(self) -> impl Iterator<Item = UnifiedRecord> {
        self.records.into_values()
    }
}

fn agreeing<T: PartialEq>(mut values: impl Iterator<Item = T>) -> Option<T> {
    let first = values.next()?;
    for v in values {
        if v != first {
            return None;
        }
    }
    Some(first)
}
