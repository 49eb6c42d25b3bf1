//! TOMPEI-CMMD ingest: one per-image metadata CSV over patient-based image
//! folders. Only rows explicitly marked as excluded are removed; they emit
//! no draft but are counted. Density arrives as textual descriptions and
//! goes through the frozen mapping table; novel strings become warnings,
//! never guesses.

use crate::adapters::{
    encode_patient_id, read_table, AdapterError, AdapterOutput, AdapterReport, DatasetAdapter,
    Draft, RawRow, RowFailure, SourceSpec,
};
use crate::model::{
    map_density, map_pathology, AsymmetryKind, Dataset, FindingSet, Laterality, Split,
    UnifiedRecord, ViewPosition,
};
use crate::selection::{ExclusionRules, SelectionPolicy, SplitPolicy};

const PATIENT_ALIASES: [&str; 3] = ["patient_id", "id1", "id"];
const LATERALITY_ALIASES: [&str; 3] = ["laterality", "leftright", "left_right"];
const CLASSIFICATION_ALIASES: [&str; 2] = ["classification", "diagnosis"];
const BIRADS_ALIASES: [&str; 2] = ["birads", "bi_rads"];
const DENSITY_ALIASES: [&str; 2] = ["density", "breast_density"];
const EXCLUDED_ALIASES: [&str; 2] = ["excluded", "exclude"];

pub struct TompeiAdapter;

impl DatasetAdapter for TompeiAdapter {
    fn name(&self) -> &'static str {
        "tompei"
    }

    fn dataset(&self) -> Dataset {
        Dataset::Tompei
    }

    fn parse(&self, source: &SourceSpec) -> Result<AdapterOutput, AdapterError> {
        let path = source.file("tompei_metadata_csv", "metadata.csv");
        let table = read_table(&path, Dataset::Tompei)?;

        for (primary, aliases) in [
            ("patient_id", &PATIENT_ALIASES[..]),
            ("laterality", &LATERALITY_ALIASES[..]),
            ("view", &["view"][..]),
            ("classification", &CLASSIFICATION_ALIASES[..]),
            ("abnormality", &["abnormality"][..]),
        ] {
            if !table.has_any_column(aliases) {
                return Err(AdapterError::MissingColumn {
                    path,
                    column: primary.to_string(),
                });
            }
        }

        let mut drafts = Vec::new();
        let mut report = AdapterReport::default();
        for row in table.rows {
            report.rows_read += 1;
            match row {
                Err(failure) => report.quarantine(failure),
                Ok(row) => {
                    if is_excluded(&row) {
                        report.rows_excluded += 1;
                        report.warn(&row.source_file, row.line, "excluded by dataset flag");
                        continue;
                    }
                    match parse_row(&row, source, &mut report) {
                        Ok(draft) => drafts.push(draft),
                        Err(failure) => report.quarantine(failure),
                    }
                }
            }
        }
        Ok(AdapterOutput {
            drafts,
            report,
            dataset: Dataset::Tompei,
        })
    }

    fn selection_policy(&self) -> SelectionPolicy {
        // Flagged cases are already removed by the adapter; partial exams
        // are kept and downstream consumers filter on view completeness.
        SelectionPolicy {
            exclusions: ExclusionRules::KeepAll,
            split: SplitPolicy::Discard,
        }
    }
}

fn is_excluded(row: &RawRow) -> bool {
    matches!(
        row.get_any(&EXCLUDED_ALIASES)
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("1") | Some("true") | Some("yes") | Some("x") | Some("excluded")
    )
}

fn parse_row(
    row: &RawRow,
    source: &SourceSpec,
    report: &mut AdapterReport,
) -> Result<Draft, RowFailure> {
    let raw_patient = row
        .get_any(&PATIENT_ALIASES)
        .ok_or_else(|| RowFailure::new(row, "missing patient id"))?
        .to_string();
    let laterality: Laterality = row
        .get_any(&LATERALITY_ALIASES)
        .ok_or_else(|| RowFailure::new(row, "missing laterality"))?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    let view: ViewPosition = row
        .require("view")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    let diagnosis = map_pathology(
        row.get_any(&CLASSIFICATION_ALIASES)
            .ok_or_else(|| RowFailure::new(row, "missing classification"))?,
        Dataset::Tompei,
    )
    .map_err(|e| RowFailure::new(row, e.to_string()))?;

    let birads = match row.get_any(&BIRADS_ALIASES) {
        None => None,
        Some(raw) => Some(
            raw.parse()
                .map_err(|e| RowFailure::new(row, format!("{e}")))?,
        ),
    };

    let density = match row.get_any(&DENSITY_ALIASES) {
        None => None,
        Some(raw) => {
            let mapped = map_density(raw, Dataset::Tompei);
            if mapped.is_none() {
                report.warn(
                    &row.source_file,
                    row.line,
                    format!("unmappable density {raw:?}"),
                );
            }
            mapped
        }
    };

    let age = row
        .get("age")
        .and_then(|v| v.trim().parse::<u32>().ok());

    let mut findings = parse_abnormality(row)?;
    if let Some(location) = row.get("location").filter(|v| !v.is_empty()) {
        findings.other_findings.push(format!("location: {location}"));
    }

    let patient_id = encode_patient_id(Dataset::Tompei, &raw_patient);
    let image_source = {
        let name = format!("{laterality}_{view}");
        let base = source.root.join(&raw_patient);
        ["dcm", "dicom", "png"]
            .iter()
            .map(|ext| base.join(format!("{name}.{ext}")))
            .find(|p| p.exists())
            .unwrap_or_else(|| base.join(format!("{name}.dcm")))
    };

    let record = UnifiedRecord {
        dataset: Dataset::Tompei,
        patient_id,
        image_id: None,
        laterality,
        view,
        age,
        density,
        diagnosis,
        birads,
        findings,
        split: Split::Unsplit,
        raw_folder: raw_patient,
        processed_path: String::new(),
    };
    Ok(Draft {
        image_source,
        record,
    })
}

fn parse_abnormality(row: &RawRow) -> Result<FindingSet, RowFailure> {
    let mut findings = FindingSet::default();
    let raw = row.require("abnormality")?.to_ascii_lowercase();
    for token in raw
        .split([',', ';', '/', '+'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
    {
        match token.replace(' ', "_").as_str() {
            "none" | "normal" => {}
            "mass" => findings.mass = true,
            "calcification" | "calc" => findings.calcification = true,
            "both" => {
                findings.mass = true;
                findings.calcification = true;
            }
            "asymmetry" => {
                findings.asymmetry = findings.asymmetry.max(Some(AsymmetryKind::Asymmetry))
            }
            "focal_asymmetry" => {
                findings.asymmetry = findings.asymmetry.max(Some(AsymmetryKind::Focal))
            }
            "global_asymmetry" => {
                findings.asymmetry = findings.asymmetry.max(Some(AsymmetryKind::Global))
            }
            "architectural_distortion" | "distortion" => {
                findings.architectural_distortion = true
            }
            other => {
                return Err(RowFailure::new(
                    row,
                    format!("unknown abnormality token {other:?}"),
                ))
            }
        }
    }
    if findings.mass {
        findings.mass_shape = opt(row.get("mass_shape"));
        findings.mass_margin = opt(row.get("mass_margin"));
        findings.mass_density = opt(row.get("mass_density"));
    }
    if findings.calcification {
        findings.calc_morphology = opt(row.get_any(&["calc_morphology", "calc_type"]));
        findings.calc_distribution = opt(row.get("calc_distribution"));
    }
    Ok(findings)
}

fn opt(value: Option<&str>) -> Option<String> {
    value.filter(|v| !v.is_empty()).map(str::to_string)
}

#[cfg(test)]
pub(crate) const TOMPEI_HEADER: &str =
    "ID1,LeftRight,view,Age,abnormality,classification,density,BI-RADS,location,excluded\n";

#[cfg(test)]
pub(crate) fn tompei_row(
    patient: &str,
    side: &str,
    view: &str,
    age: &str,
    abnormality: &str,
    classification: &str,
    density: &str,
    birads: &str,
    location: &str,
    excluded: &str,
) -> String {
    format!("{patient},{side},{view},{age},{abnormality},{classification},{density},{birads},{location},{excluded}\n")
}
