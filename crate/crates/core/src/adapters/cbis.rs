//! CBIS-DDSM ingest: four image-based CSVs (mass/calc x train/test), one
//! draft per row. The predefined split is discarded at parse time; subsets
//! are concatenated and repeated cases merge later during case selection.

#[cfg(test)]
use std::path::Path;

use crate::adapters::{
    encode_image_id, encode_patient_id, read_table, AdapterError, AdapterOutput, AdapterReport,
    DatasetAdapter, Draft, RawRow, RowFailure, SourceSpec,
};
use crate::model::{
    map_density, map_pathology, AsymmetryKind, Dataset, FindingSet, Split, UnifiedRecord,
};
use crate::selection::{ExclusionRules, SelectionPolicy, SplitPolicy};

const FILES: [(&str, &str); 4] = [
    ("cbis_mass_train_csv", "mass_case_description_train_set.csv"),
    ("cbis_mass_test_csv", "mass_case_description_test_set.csv"),
    ("cbis_calc_train_csv", "calc_case_description_train_set.csv"),
    ("cbis_calc_test_csv", "calc_case_description_test_set.csv"),
];

const REQUIRED: [&str; 7] = [
    "patient_id",
    "left_or_right_breast",
    "image_view",
    "abnormality_type",
    "assessment",
    "pathology",
    "image_file_path",
];

pub struct CbisAdapter;

impl DatasetAdapter for CbisAdapter {
    fn name(&self) -> &'static str {
        "cbis"
    }

    fn dataset(&self) -> Dataset {
        Dataset::Cbis
    }

    fn parse(&self, source: &SourceSpec) -> Result<AdapterOutput, AdapterError> {
        let mut drafts = Vec::new();
        let mut report = AdapterReport::default();

        for (key, default) in FILES {
            let path = source.file(key, default);
            let table = read_table(&path, Dataset::Cbis)?;
            table.require_columns(&path, &REQUIRED)?;

            for row in table.rows {
                report.rows_read += 1;
                match row {
                    Err(failure) => report.quarantine(failure),
                    Ok(row) => match parse_row(&row, source, &mut report) {
                        Ok(draft) => drafts.push(draft),
                        Err(failure) => report.quarantine(failure),
                    },
                }
            }
        }
        Ok(AdapterOutput {
            drafts,
            report,
            dataset: Dataset::Cbis,
        })
    }

    fn selection_policy(&self) -> SelectionPolicy {
        SelectionPolicy {
            exclusions: ExclusionRules::Full,
            split: SplitPolicy::Discard,
        }
    }
}

fn parse_row(
    row: &RawRow,
    source: &SourceSpec,
    report: &mut AdapterReport,
) -> Result<Draft, RowFailure> {
    let raw_patient = row.require("patient_id")?;
    let laterality = row
        .require("left_or_right_breast")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    let view = row
        .require("image_view")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;
    let diagnosis = map_pathology(row.require("pathology")?, Dataset::Cbis)
        .map_err(|e| RowFailure::new(row, e.to_string()))?;
    let birads = row
        .require("assessment")?
        .parse()
        .map_err(|e| RowFailure::new(row, format!("{e}")))?;

    let density = match row.get_any(&["breast_density"]) {
        None => None,
        Some(raw) => {
            let mapped = map_density(raw, Dataset::Cbis);
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

    let findings = parse_findings(row, report)?;

    let image_path = row.require("image_file_path")?.replace('\\', "/");
    let raw_folder = image_path
        .split('/')
        .next()
        .unwrap_or(&image_path)
        .to_string();

    let record = UnifiedRecord {
        dataset: Dataset::Cbis,
        patient_id: encode_patient_id(Dataset::Cbis, raw_patient),
        image_id: Some(encode_image_id(Dataset::Cbis, &image_path)),
        laterality,
        view,
        age: None,
        density,
        diagnosis,
        birads: Some(birads),
        findings,
        split: Split::Unsplit,
        raw_folder,
        processed_path: String::new(),
    };
    Ok(Draft {
        image_source: source.root.join(&image_path),
        record,
    })
}

/// Shape values that are not mass shapes but standalone finding types; the
/// mass subset also carries asymmetry and distortion rows.
fn special_shape_token(token: &str) -> Option<SpecialToken> {
    match token {
        "ARCHITECTURAL_DISTORTION" => Some(SpecialToken::Distortion),
        "ASYMMETRIC_BREAST_TISSUE" => Some(SpecialToken::Asymmetry(AsymmetryKind::Asymmetry)),
        "FOCAL_ASYMMETRIC_DENSITY" => Some(SpecialToken::Asymmetry(AsymmetryKind::Focal)),
        "LYMPH_NODE" => Some(SpecialToken::Other("LYMPH_NODE")),
        _ => None,
    }
}

enum SpecialToken {
    Distortion,
    Asymmetry(AsymmetryKind),
    Other(&'static str),
}

fn parse_findings(row: &RawRow, report: &mut AdapterReport) -> Result<FindingSet, RowFailure> {
    let mut findings = FindingSet::default();
    let abnormality = row.require("abnormality_type")?.to_ascii_lowercase();

    match abnormality.as_str() {
        "calcification" => {
            findings.calcification = true;
            findings.calc_morphology = nonempty(row.get_any(&["calc_type"]));
            findings.calc_distribution = nonempty(row.get_any(&["calc_distribution"]));
        }
        "mass" => {
            let shape_raw = row.get_any(&["mass_shape"]).unwrap_or("");
            let mut mass_tokens: Vec<&str> = Vec::new();
            for token in shape_raw.split('-').filter(|t| !t.is_empty()) {
                match special_shape_token(token) {
                    Some(SpecialToken::Distortion) => findings.architectural_distortion = true,
                    Some(SpecialToken::Asymmetry(kind)) => {
                        findings.asymmetry = findings.asymmetry.max(Some(kind));
                    }
                    Some(SpecialToken::Other(text)) => findings.other_findings.push(text.into()),
                    None => mass_tokens.push(token),
                }
            }
            let special_only = mass_tokens.is_empty() && !findings.is_empty();
            findings.mass = !special_only;
            if findings.mass {
                findings.mass_shape = if mass_tokens.is_empty() {
                    None
                } else {
                    Some(mass_tokens.join("-"))
                };
                findings.mass_margin = nonempty(row.get_any(&["mass_margins", "mass_margin"]));
            } else if let Some(margins) = nonempty(row.get_any(&["mass_margins", "mass_margin"])) {
                report.warn(
                    &row.source_file,
                    row.line,
                    format!("dropped margins {margins:?} on a non-mass finding"),
                );
            }
        }
        other => {
            return Err(RowFailure::new(
                row,
                format!("unknown abnormality type {other:?}"),
            ))
        }
    }
    Ok(findings)
}

fn nonempty(value: Option<&str>) -> Option<String> {
    value.filter(|v| !v.is_empty()).map(str::to_string)
}

#[cfg(test)]
pub(crate) fn write_cbis_fixture(root: &Path, rows: &CbisFixture) -> std::io::Result<()> {
    const HEADER: &str = "patient_id,breast_density,left or right breast,image view,abnormality id,abnormality type,mass shape,mass margins,assessment,pathology,subtlety,image file path\n";
    const CALC_HEADER: &str = "patient_id,breast density,left or right breast,image view,abnormality id,abnormality type,calc type,calc distribution,assessment,pathology,subtlety,image file path\n";
    std::fs::write(
        root.join("mass_case_description_train_set.csv"),
        format!("{HEADER}{}", rows.mass_train.join("")),
    )?;
    std::fs::write(
        root.join("mass_case_description_test_set.csv"),
        format!("{HEADER}{}", rows.mass_test.join("")),
    )?;
    std::fs::write(
        root.join("calc_case_description_train_set.csv"),
        format!("{CALC_HEADER}{}", rows.calc_train.join("")),
    )?;
    std::fs::write(
        root.join("calc_case_description_test_set.csv"),
        format!("{CALC_HEADER}{}", rows.calc_test.join("")),
    )?;
    Ok(())
}

#[cfg(test)]
#[derive(Default)]
pub(crate) struct CbisFixture {
    pub mass_train: Vec<String>,
    pub mass_test: Vec<String>,
    pub calc_train: Vec<String>,
    pub calc_test: Vec<String>,
}

#[cfg(test)]
pub(crate) fn mass_row(
    patient: &str,
    density: &str,
    side: &str,
    view: &str,
    shape: &str,
    margins: &str,
    assessment: &str,
    pathology: &str,
) -> String {
    format!(
        "{patient},{density},{side},{view},1,mass,{shape},{margins},{assessment},{pathology},3,Mass-Training_{patient}_{side}_{view}/1.1/000000.dcm\n"
    )
}

#[cfg(test)]
pub(crate) fn calc_row(
    patient: &str,
    density: &str,
    side: &str,
    view: &str,
    calc_type: &str,
    distribution: &str,
    assessment: &str,
    pathology: &str,
) -> String {
    format!(
        "{patient},{density},{side},{view},1,calcification,{calc_type},{distribution},{assessment},{pathology},3,Calc-Training_{patient}_{side}_{view}/1.1/000000.dcm\n"
    )
}
