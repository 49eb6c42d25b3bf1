//! The harmonized output layout and its readers.
//!
//! ```text
//! <root>/
//!   manifest.json          schema version, dataset, counts, config hash
//!   metadata.csv           one row per image, fixed column order
//!   qc_report.csv          per-image detection/correction record
//!   selection_report.csv   per-exam keep/exclude decisions
//!   <patient_id>/
//!     L_CC.png  L_MLO.png  R_CC.png  R_MLO.png   (present views)
//!     meta.txt             human-readable per-breast summary
//! ```
//!
//! All outputs are timestamp-free; the config fingerprint in the manifest
//! provides provenance instead, so identical inputs reproduce byte-identical
//! stores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgio::{read_image, write_image, BitDepth, ImageBuffer};
use crate::model::{
    validate_record, AsymmetryKind, Dataset, ImageKey, Laterality, UnifiedRecord, Violation,
};
use crate::pipeline::{detect_laterality, DetectorConfig, NormalizationParams, QcReport};

pub const SCHEMA_VERSION: &str = "1.0.0";
const SENTINEL: &str = ".incomplete";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error: {0}")]
    Image(#[from] crate::imgio::ImageIoError),
    #[error("duplicate image slot {key} (filename collision)")]
    FilenameCollision { key: String },
    #[error("store at {root} was written with schema {found:?}, this build reads {expected:?}")]
    SchemaVersionMismatch {
        root: PathBuf,
        found: String,
        expected: String,
    },
    #[error("store at {root} is incomplete (found {SENTINEL} sentinel)")]
    IncompleteStore { root: PathBuf },
    #[error("{count} image files referenced by metadata are missing:\n{listing}")]
    MissingFiles { count: usize, listing: String },
    #[error("malformed store at {root}: {detail}")]
    MalformedStore { root: PathBuf, detail: String },
}

/// Store-level identity and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub schema_version: String,
    pub dataset: Dataset,
    pub patients: u64,
    pub images: u64,
    pub config_fingerprint: String,
    /// Filled from the directory being read, never serialized: stores stay
    /// relocatable and reruns byte-identical.
    #[serde(skip)]
    pub root: PathBuf,
}

/// One processed image ready for storage.
pub struct ProcessedImage {
    pub record: UnifiedRecord,
    pub image: ImageBuffer,
    pub qc: QcReport,
}

pub const METADATA_COLUMNS: [&str; 21] = [
    "id",
    "image_id",
    "laterality",
    "view",
    "age",
    "density",
    "diagnosis",
    "birads",
    "mass",
    "mass_shape",
    "mass_margin",
    "mass_density",
    "calcification",
    "calcification_morphology",
    "calcification_distribution",
    "asymmetry",
    "architectural_distortion",
    "other_findings",
    "split",
    "raw_folder",
    "processed_path",
];

const QC_COLUMNS: [&str; 17] = [
    "id",
    "laterality",
    "view",
    "declared_laterality",
    "detected_laterality",
    "laterality_tie",
    "laterality_confidence",
    "laterality_flipped",
    "mirrored",
    "intensity_inverted",
    "intensity_confidence",
    "source_bit_depth",
    "source_stored_bits",
    "min_in",
    "max_in",
    "target_bits",
    "warnings",
];

/// Incremental store writer: patient folders may be written from parallel
/// workers, the global tables are written once at the end by a single
/// caller.
pub struct StoreWriter {
    root: PathBuf,
    dataset: Dataset,
    config_fingerprint: String,
}

impl StoreWriter {
    pub fn create(
        root: impl Into<PathBuf>,
        dataset: Dataset,
        config_fingerprint: impl Into<String>,
    ) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        write_text(&root.join(SENTINEL), "in progress\n")?;
        Ok(Self {
            root,
            dataset,
            config_fingerprint: config_fingerprint.into(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes one patient folder: images named `<L|R>_<CC|MLO>.png` plus the
    /// per-patient metadata text file. All records must share the patient id.
    pub fn write_patient(
        &self,
        records: &[(UnifiedRecord, ImageBuffer)],
    ) -> Result<(), StoreError> {
        let patient_id = match records.first() {
            Some((record, _)) => record.patient_id.clone(),
            None => return Ok(()),
        };
        let dir = self.root.join(&patient_id);
        std::fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;

        let mut seen = BTreeSet::new();
        for (record, image) in records {
            assert_eq!(record.patient_id, patient_id, "records grouped per patient");
            let key = record.key();
            if !seen.insert((key.laterality, key.view)) {
                return Err(StoreError::FilenameCollision {
                    key: key.to_string(),
                });
            }
            write_image(image, &dir.join(key.file_name()))?;
        }
        write_text(
            &dir.join("meta.txt"),
            &render_meta_txt(&patient_id, records.iter().map(|(r, _)| r)),
        )?;
        Ok(())
    }

    /// Writes metadata.csv, qc_report.csv and manifest.json, then clears the
    /// in-progress sentinel. Record order in the tables is canonical
    /// regardless of input order.
    pub fn finalize(
        self,
        mut records: Vec<UnifiedRecord>,
        mut qc: Vec<QcReport>,
    ) -> Result<StoreManifest, StoreError> {
        records.sort_by_key(|r| r.sort_key());
        qc.sort_by_key(|q| q.key.clone());

        let mut slot_keys = BTreeSet::new();
        for record in &records {
            if !slot_keys.insert((record.patient_id.clone(), record.laterality, record.view)) {
                return Err(StoreError::FilenameCollision {
                    key: record.key().to_string(),
                });
            }
        }

        write_text(&self.root.join("metadata.csv"), &render_metadata_csv(&records))?;
        write_text(&self.root.join("qc_report.csv"), &render_qc_csv(&qc))?;

        let patients = records
            .iter()
            .map(|r| r.patient_id.as_str())
            .collect::<BTreeSet<_>>()
            .len() as u64;
        let manifest = StoreManifest {
            schema_version: SCHEMA_VERSION.to_string(),
            dataset: self.dataset,
            patients,
            images: records.len() as u64,
            config_fingerprint: self.config_fingerprint.clone(),
            root: self.root.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_text(&self.root.join("manifest.json"), &format!("{json}\n"))?;

        let sentinel = self.root.join(SENTINEL);
        std::fs::remove_file(&sentinel).map_err(|source| StoreError::Io {
            path: sentinel,
            source,
        })?;
        Ok(manifest)
    }
}

/// One-shot store write for already-processed images.
pub fn write_store(
    items: Vec<ProcessedImage>,
    root: &Path,
    dataset: Dataset,
    config_fingerprint: &str,
) -> Result<StoreManifest, StoreError> {
    let writer = StoreWriter::create(root, dataset, config_fingerprint)?;
    let mut by_patient: BTreeMap<String, Vec<(UnifiedRecord, ImageBuffer)>> = BTreeMap::new();
    let mut records = Vec::with_capacity(items.len());
    let mut qc = Vec::with_capacity(items.len());
    for item in items {
        records.push(item.record.clone());
        qc.push(item.qc);
        by_patient
            .entry(item.record.patient_id.clone())
            .or_default()
            .push((item.record, item.image));
    }
    for group in by_patient.values() {
        writer.write_patient(group)?;
    }
    writer.finalize(records, qc)
}

/// Reads manifest and metadata without requiring image files to exist; the
/// tolerant path used by audits over metadata-only stores.
pub fn read_records(root: &Path) -> Result<(Vec<UnifiedRecord>, StoreManifest), StoreError> {
    if root.join(SENTINEL).exists() {
        return Err(StoreError::IncompleteStore {
            root: root.to_path_buf(),
        });
    }
    let manifest_path = root.join("manifest.json");
    let manifest_text =
        std::fs::read_to_string(&manifest_path).map_err(|source| StoreError::Io {
            path: manifest_path.clone(),
            source,
        })?;
    let mut manifest: StoreManifest =
        serde_json::from_str(&manifest_text).map_err(|e| StoreError::MalformedStore {
            root: root.to_path_buf(),
            detail: format!("manifest.json: {e}"),
        })?;
    manifest.root = root.to_path_buf();
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaVersionMismatch {
            root: root.to_path_buf(),
            found: manifest.schema_version,
            expected: SCHEMA_VERSION.to_string(),
        });
    }

    let records = parse_metadata_csv(root, manifest.dataset)?;
    if records.len() as u64 != manifest.images {
        return Err(StoreError::MalformedStore {
            root: root.to_path_buf(),
            detail: format!(
                "manifest says {} images, metadata.csv has {}",
                manifest.images,
                records.len()
            ),
        });
    }
    Ok((records, manifest))
}

/// Strict read: everything `read_records` does plus existence of every
/// referenced image. Missing files are reported all at once.
pub fn read_store(root: &Path) -> Result<(Vec<UnifiedRecord>, StoreManifest), StoreError> {
    let (records, manifest) = read_records(root)?;
    let missing: Vec<String> = records
        .iter()
        .filter(|r| !r.processed_path.is_empty() && !root.join(&r.processed_path).exists())
        .map(|r| r.processed_path.clone())
        .collect();
    if !missing.is_empty() {
        return Err(StoreError::MissingFiles {
            count: missing.len(),
            listing: missing.join("\n"),
        });
    }
    Ok((records, manifest))
}

/// Reads the QC table back into reports.
pub fn read_qc(root: &Path) -> Result<Vec<QcReport>, StoreError> {
    let path = root.join("qc_report.csv");
    let text = std::fs::read_to_string(&path).map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| StoreError::MalformedStore {
            root: root.to_path_buf(),
            detail: format!("qc_report.csv: {e}"),
        })?;
        out.push(parse_qc_row(&row, root)?);
    }
    Ok(out)
}

/// Checks the whole store and reports violations instead of aborting: the
/// naming convention, record invariants, image readability and depth, the
/// orientation convention, and dynamic range.
pub fn validate_store(root: &Path, cfg: &DetectorConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if root.join(SENTINEL).exists() {
        out.push(Violation::new(
            root.display().to_string(),
            "incomplete-store",
            "the in-progress sentinel is still present",
        ));
    }
    let records = match read_records(root) {
        Ok((records, _)) => records,
        Err(err) => {
            out.push(Violation::new(
                root.display().to_string(),
                "store-structure",
                err.to_string(),
            ));
            return out;
        }
    };

    for record in &records {
        let key = record.key().to_string();
        for violation in validate_record(record) {
            out.push(Violation::new(
                format!("{key}:{}", violation.field),
                violation.rule,
                violation.detail,
            ));
        }
        if record.processed_path.is_empty() {
            out.push(Violation::new(key.clone(), "missing-image", "no processed image recorded"));
            continue;
        }
        if record.processed_path != record.canonical_processed_path() {
            // Already reported by validate_record; skip the file checks.
            continue;
        }
        let path = root.join(&record.processed_path);
        if !path.exists() {
            out.push(Violation::new(
                key.clone(),
                "missing-image",
                format!("{} does not exist", record.processed_path),
            ));
            continue;
        }
        match read_image(&path) {
            Err(err) => out.push(Violation::new(key.clone(), "unreadable-image", err.to_string())),
            Ok((image, _)) => {
                if image.bit_depth() != BitDepth::Sixteen {
                    out.push(Violation::new(
                        key.clone(),
                        "bit-depth",
                        format!("expected 16-bit, found {}-bit", image.bit_depth().bits()),
                    ));
                }
                let detection = detect_laterality(&image, cfg);
                if detection.side == Laterality::R && !detection.tie {
                    out.push(Violation::new(
                        key.clone(),
                        "orientation",
                        "tissue detected on the right edge; store convention is left",
                    ));
                }
                let (min, max) = image.min_max();
                let full_range = min == 0 && max == u16::MAX;
                let constant = min == max;
                if !full_range && !constant {
                    out.push(Violation::new(
                        key.clone(),
                        "dynamic-range",
                        format!("sample range [{min}, {max}] is not full-scale"),
                    ));
                }
            }
        }
    }
    out
}

fn write_text(path: &Path, content: &str) -> Result<(), StoreError> {
    std::fs::write(path, content).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// One dialect everywhere: comma-separated, every field quoted, UTF-8, LF.
fn csv_builder() -> csv::WriterBuilder {
    let mut builder = csv::WriterBuilder::new();
    builder
        .quote_style(csv::QuoteStyle::Always)
        .terminator(csv::Terminator::Any(b'\n'));
    builder
}

fn render_metadata_csv(records: &[UnifiedRecord]) -> String {
    let mut writer = csv_builder().from_writer(Vec::new());
    writer.write_record(METADATA_COLUMNS).expect("header");
    for r in records {
        writer.write_record(record_to_row(r)).expect("row");
    }
    String::from_utf8(writer.into_inner().expect("flush")).expect("utf8")
}

fn record_to_row(r: &UnifiedRecord) -> Vec<String> {
    let f = &r.findings;
    vec![
        r.patient_id.clone(),
        r.image_id.clone().unwrap_or_default(),
        r.laterality.to_string(),
        r.view.to_string(),
        r.age.map(|a| a.to_string()).unwrap_or_default(),
        r.density.map(|d| d.to_string()).unwrap_or_default(),
        r.diagnosis.to_string(),
        r.birads.map(|b| b.to_string()).unwrap_or_default(),
        flag(f.mass),
        f.mass_shape.clone().unwrap_or_default(),
        f.mass_margin.clone().unwrap_or_default(),
        f.mass_density.clone().unwrap_or_default(),
        flag(f.calcification),
        f.calc_morphology.clone().unwrap_or_default(),
        f.calc_distribution.clone().unwrap_or_default(),
        f.asymmetry.map(|a| a.to_string()).unwrap_or_default(),
        flag(f.architectural_distortion),
        f.other_findings.join(";"),
        r.split.to_string(),
        r.raw_folder.clone(),
        r.processed_path.clone(),
    ]
}

fn flag(value: bool) -> String {
    if value { "1".into() } else { "0".into() }
}

fn parse_metadata_csv(root: &Path, dataset: Dataset) -> Result<Vec<UnifiedRecord>, StoreError> {
    let path = root.join("metadata.csv");
    let text = std::fs::read_to_string(&path).map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(root, format!("metadata.csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != METADATA_COLUMNS {
        return Err(malformed(
            root,
            format!("metadata.csv columns {headers:?} do not match the schema"),
        ));
    }

    let mut records = Vec::new();
    for (idx, result) in reader.records().enumerate() {
        let row = result.map_err(|e| malformed(root, format!("metadata.csv row {}: {e}", idx + 1)))?;
        records.push(
            row_to_record(&row, dataset)
                .map_err(|detail| malformed(root, format!("metadata.csv row {}: {detail}", idx + 1)))?,
        );
    }
    Ok(records)
}

fn row_to_record(row: &csv::StringRecord, dataset: Dataset) -> Result<UnifiedRecord, String> {
    let get = |i: usize| row.get(i).unwrap_or("").to_string();
    let opt = |i: usize| {
        let v = get(i);
        if v.is_empty() { None } else { Some(v) }
    };
    let parse_flag = |i: usize| match row.get(i).unwrap_or("0") {
        "1" => Ok(true),
        "0" | "" => Ok(false),
        other => Err(format!("bad flag value {other:?}")),
    };

    let findings = crate::model::FindingSet {
        mass: parse_flag(8)?,
        mass_shape: opt(9),
        mass_margin: opt(10),
        mass_density: opt(11),
        calcification: parse_flag(12)?,
        calc_morphology: opt(13),
        calc_distribution: opt(14),
        asymmetry: match opt(15) {
            None => None,
            Some(v) => Some(v.parse::<AsymmetryKind>().map_err(|e| e.to_string())?),
        },
        architectural_distortion: parse_flag(16)?,
        other_findings: match opt(17) {
            None => Vec::new(),
            Some(v) => v.split(';').map(str::to_string).collect(),
        },
    };

    Ok(UnifiedRecord {
        dataset,
        patient_id: get(0),
        image_id: opt(1),
        laterality: get(2).parse().map_err(|e: crate::model::ParseCategoryError| e.to_string())?,
        view: get(3).parse().map_err(|e: crate::model::ParseCategoryError| e.to_string())?,
        age: match opt(4) {
            None => None,
            Some(v) => Some(v.parse().map_err(|_| format!("bad age {v:?}"))?),
        },
        density: match opt(5) {
            None => None,
            Some(v) => Some(v.parse().map_err(|e: crate::model::ParseCategoryError| e.to_string())?),
        },
        diagnosis: get(6).parse().map_err(|e: crate::model::ParseCategoryError| e.to_string())?,
        birads: match opt(7) {
            None => None,
            Some(v) => Some(v.parse().map_err(|e: crate::model::ParseCategoryError| e.to_string())?),
        },
        findings,
        split: get(18).parse().map_err(|e: crate::model::ParseCategoryError| e.to_string())?,
        raw_folder: get(19),
        processed_path: get(20),
    })
}

fn malformed(root: &Path, detail: String) -> StoreError {
    StoreError::MalformedStore {
        root: root.to_path_buf(),
        detail,
    }
}

fn render_qc_csv(reports: &[QcReport]) -> String {
    let mut writer = csv_builder().from_writer(Vec::new());
    writer.write_record(QC_COLUMNS).expect("header");
    for q in reports {
        writer
            .write_record(vec![
                q.key.patient_id.clone(),
                q.key.laterality.to_string(),
                q.key.view.to_string(),
                q.declared_laterality.to_string(),
                q.detected_laterality.to_string(),
                flag(q.laterality_tie),
                format!("{}", q.laterality_confidence),
                flag(q.laterality_flipped),
                flag(q.mirrored),
                flag(q.intensity_inverted),
                format!("{}", q.intensity_confidence),
                q.source_bit_depth.to_string(),
                q.source_stored_bits.to_string(),
                q.normalization.min_in.to_string(),
                q.normalization.max_in.to_string(),
                q.normalization.target_bits.to_string(),
                q.warnings.join(";"),
            ])
            .expect("row");
    }
    String::from_utf8(writer.into_inner().expect("flush")).expect("utf8")
}

fn parse_qc_row(row: &csv::StringRecord, root: &Path) -> Result<QcReport, StoreError> {
    let get = |i: usize| row.get(i).unwrap_or("").to_string();
    let parse_bool = |i: usize| get(i) == "1";
    let parse_f64 = |i: usize| get(i).parse::<f64>().unwrap_or(0.0);
    let parse_u16 = |i: usize, name: &str| {
        get(i)
            .parse::<u16>()
            .map_err(|_| malformed(root, format!("qc_report.csv: bad {name}")))
    };

    let key = ImageKey::new(
        get(0),
        get(1).parse().map_err(|_| malformed(root, "qc_report.csv: bad laterality".into()))?,
        get(2).parse().map_err(|_| malformed(root, "qc_report.csv: bad view".into()))?,
    );
    Ok(QcReport {
        key,
        declared_laterality: get(3)
            .parse()
            .map_err(|_| malformed(root, "qc_report.csv: bad declared laterality".into()))?,
        detected_laterality: get(4)
            .parse()
            .map_err(|_| malformed(root, "qc_report.csv: bad detected laterality".into()))?,
        laterality_tie: parse_bool(5),
        laterality_confidence: parse_f64(6),
        laterality_flipped: parse_bool(7),
        mirrored: parse_bool(8),
        intensity_inverted: parse_bool(9),
        intensity_confidence: parse_f64(10),
        source_bit_depth: parse_u16(11, "source_bit_depth")?,
        source_stored_bits: parse_u16(12, "source_stored_bits")?,
        normalization: NormalizationParams {
            min_in: parse_u16(13, "min_in")?,
            max_in: parse_u16(14, "max_in")?,
            target_bits: get(15)
                .parse()
                .map_err(|_| malformed(root, "qc_report.csv: bad target_bits".into()))?,
        },
        warnings: match get(16) {
            v if v.is_empty() => Vec::new(),
            v => v.split(';').map(str::to_string).collect(),
        },
    })
}

/// Human-readable per-patient summary: one block per breast side carrying
/// the fields that are consistent across that side's views, `-` otherwise.
/// This layout is the normative definition of meta.txt for this toolkit.
fn render_meta_txt<'a>(
    patient_id: &str,
    records: impl Iterator<Item = &'a UnifiedRecord>,
) -> String {
    let mut by_side: BTreeMap<Laterality, Vec<&UnifiedRecord>> = BTreeMap::new();
    for record in records {
        by_side.entry(record.laterality).or_default().push(record);
    }

    let mut out = format!("patient: {patient_id}\n");
    for (side, members) in by_side {
        let _ = write!(out, "\nlaterality: {side}\n");
        let agree = |f: &dyn Fn(&UnifiedRecord) -> Option<String>| -> String {
            let values: Vec<Option<String>> = members.iter().map(|r| f(r)).collect();
            match values.split_first() {
                Some((first, rest)) if rest.iter().all(|v| v == first) => {
                    first.clone().unwrap_or_else(|| "-".into())
                }
                _ => "-".into(),
            }
        };
        let _ = writeln!(out, "age: {}", agree(&|r| r.age.map(|a| a.to_string())));
        let _ = writeln!(out, "density: {}", agree(&|r| r.density.map(|d| d.to_string())));
        let _ = writeln!(out, "diagnosis: {}", agree(&|r| Some(r.diagnosis.to_string())));
        let _ = writeln!(out, "birads: {}", agree(&|r| r.birads.map(|b| b.to_string())));
    }
    out
}

#[cfg(test)]
mod tests;
