//! VinDr-Mammo ingest: breast-level annotations joined with per-image
//! finding annotations by image id. The train/test split is the only one
//! the toolkit retains. No biopsy labels exist, so the diagnosis is
//! Unknown throughout; assessments are deliberately not used as a stand-in.

use std::collections::BTreeMap;

use crate::adapters::{
    encode_image_id, encode_patient_id, read_table, AdapterError, AdapterOutput, AdapterReport,
    DatasetAdapter, Draft, RawRow, RowFailure, SourceSpec,
};
use crate::model::{
    map_density, AsymmetryKind, BiRadsScore, Dataset, Diagnosis, FindingSet, Laterality, Split,
    UnifiedRecord, ViewPosition,
};
use crate::selection::{ExclusionRules, SelectionPolicy, SplitPolicy};

const BREAST_REQUIRED: [&str; 7] = [
    "study_id",
    "image_id",
    "laterality",
    "view_position",
    "breast_birads",
    "breast_density",
    "split",
];
const FINDING_REQUIRED: [&str; 2] = ["image_id", "finding_categories"];

pub struct VindrAdapter;

impl DatasetAdapter for VindrAdapter {
    fn name(&self) -> &'static str {
        "vindr"
    }

    fn dataset(&self) -> Dataset {
        Dataset::Vindr
    }

    fn parse(&self, source: &SourceSpec) -> Result<AdapterOutput, AdapterError> {
        let breast_path = source.file("vindr_breast_csv", "breast-level_annotations.csv");
        let finding_path = source.file("vindr_finding_csv", "finding_annotations.csv");

        let breast = read_table(&breast_path, Dataset::Vindr)?;
        breast.require_columns(&breast_path, &BREAST_REQUIRED)?;
        let finding = read_table(&finding_path, Dataset::Vindr)?;
        finding.require_columns(&finding_path, &FINDING_REQUIRED)?;

        let mut report = AdapterReport::default();

        // Finding rows joined by raw image id; rows without categories are
        // background boxes and contribute nothing.
        let mut findings_by_image: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for row in finding.rows {
            report.rows_read += 1;
            match row {
                Err(failure) => report.quarantine(failure),
                Ok(row) => {
                    let image_id = match row.require("image_id") {
                        Ok(v) => v.to_string(),
                        Err(failure) => {
                            report.quarantine(failure);
                            continue;
                        }
                    };
                    let categories = parse_category_list(row.get("finding_categories").unwrap_or(""));
                    findings_by_image.entry(image_id).or_default().extend(categories);
                }
            }
        }

        let mut drafts = Vec::new();
        for row in breast.rows {
            report.rows_read += 1;
            match row {
                Err(failure) => report.quarantine(failure),
                Ok(row) => match parse_breast_row(&row, source, &findings_by_image, &mut report) {
                    Ok(draft) => drafts.push(draft),
                    Err(failure) => report.quarantine(failure),
                },
            }
        }
        Ok(AdapterOutput {
            drafts,
            report,
            dataset: Dataset::Vindr,
        })
    }

    fn selection_policy(&self) -> SelectionPolicy {
        // All cases retained; only the split must agree across views.
        SelectionPolicy {
            exclusions: ExclusionRules::KeepAll,
            split: SplitPolicy::Retain,
        }
    }
}

fn parse_breast_row(
    row: &RawRow,
    source: &SourceSpec,
    findings_by_image: &BTreeMap<String, Vec<String>>,
    report: &mut AdapterReport,
) -> Result<Draft, RowFailure> {
    let study_id = row.require("study_id")?.to_string();
    let raw_image_id = row.require("image_id")?.to_string();
    let laterality: Laterality = row
        .require("laterality")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    let view: ViewPosition = row
        .require("view_position")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    let birads = parse_birads_label(row.require("breast_birads")?)
        .ok_or_else(|| RowFailure::new(row, "unparseable BI-RADS label"))?;
    let split: Split = row
        .require("split")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    if split == Split::Unsplit {
        return Err(RowFailure::new(row, "VinDr rows must carry train/test"));
    }

    let density = {
        let raw = row.require("breast_density")?;
        let mapped = map_density(raw, Dataset::Vindr);
        if mapped.is_none() {
            report.warn(
                &row.source_file,
                row.line,
                format!("unmappable density {raw:?}"),
            );
        }
        mapped
    };

    let findings = build_findings(
        findings_by_image
            .get(&raw_image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]),
    );

    let raw_folder = format!("images/{study_id}");
    let image_source = {
        let base = source.root.join("images").join(&study_id);
        ["dicom", "dcm", "png"]
            .iter()
            .map(|ext| base.join(format!("{raw_image_id}.{ext}")))
            .find(|p| p.exists())
            .unwrap_or_else(|| base.join(format!("{raw_image_id}.dicom")))
    };

    let record = UnifiedRecord {
        dataset: Dataset::Vindr,
        patient_id: encode_patient_id(Dataset::Vindr, &study_id),
        image_id: Some(encode_image_id(Dataset::Vindr, &raw_image_id)),
        laterality,
        view,
        age: None,
        density,
        diagnosis: Diagnosis::Unknown,
        birads: Some(birads),
        findings,
        split,
        raw_folder,
        processed_path: String::new(),
    };
    Ok(Draft {
        image_source,
        record,
    })
}

/// Accepts `BI-RADS 4`, `BIRADS 4`, or a bare digit.
fn parse_birads_label(raw: &str) -> Option<BiRadsScore> {
    let digits: String = raw.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.parse::<u8>().ok().and_then(|v| BiRadsScore::new(v).ok())
}

/// Splits a list-like annotation value (`['Mass', 'Focal Asymmetry']`) into
/// trimmed category names.
fn parse_category_list(raw: &str) -> Vec<String> {
    raw.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|part| part.trim().trim_matches(['\'', '"']).trim().to_string())
        .filter(|part| !part.is_empty())
        .collect()
}

fn build_findings(categories: &[String]) -> FindingSet {
    let mut findings = FindingSet::default();
    let mut others: Vec<String> = Vec::new();
    for category in categories {
        match category.to_ascii_lowercase().as_str() {
            "mass" => findings.mass = true,
            "suspicious calcification" => findings.calcification = true,
            "asymmetry" => {
                findings.asymmetry = findings.asymmetry.max(Some(AsymmetryKind::Asymmetry))
            }
            "focal asymmetry" => {
                findings.asymmetry = findings.asymmetry.max(Some(AsymmetryKind::Focal))
            }
            "global asymmetry" => {
                findings.asymmetry = findings.asymmetry.max(Some(AsymmetryKind::Global))
            }
            "architectural distortion" => findings.architectural_distortion = true,
            "no finding" => {}
            _ => others.push(category.clone()),
        }
    }
    others.sort_unstable();
    others.dedup();
    findings.other_findings = others;
    findings
}

#[cfg(test)]
pub(crate) const VINDR_BREAST_HEADER: &str =
    "study_id,series_id,image_id,laterality,view_position,height,width,breast_birads,breast_density,split\n";
#[cfg(test)]
pub(crate) const VINDR_FINDING_HEADER: &str =
    "study_id,image_id,finding_categories,xmin,ymin,xmax,ymax,split\n";

#[cfg(test)]
pub(crate) fn vindr_breast_row(
    study: &str,
    image: &str,
    side: &str,
    view: &str,
    birads: &str,
    density: &str,
    split: &str,
) -> String {
    format!("{study},series,{image},{side},{view},3518,2800,{birads},{density},{split}\n")
}

#[cfg(test)]
pub(crate) fn vindr_finding_row(study: &str, image: &str, categories: &str) -> String {
    format!("{study},{image},\"{categories}\",10,10,50,50,training\n")
}
