//! Bias quantification: category distributions, diagnosis x assessment
//! co-occurrence, abnormality prevalence, and corruption prevalence rates.
//!
//! Every output is an [`AuditTable`]: a labeled count matrix with margins.
//! Cells that are structurally unavailable for a dataset (no biopsy labels,
//! no finding annotations below BI-RADS 3) are marked N/A instead of being
//! shown as zeros; zero and unavailable are different facts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::model::{Dataset, Diagnosis, UnifiedRecord};
use crate::pipeline::QcReport;

/// Labeled contingency/histogram matrix with precomputed margins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditTable {
    /// File-name stem for rendered outputs.
    pub name: String,
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<u64>>,
    pub row_margins: Vec<u64>,
    pub col_margins: Vec<u64>,
    pub grand_total: u64,
    /// Row/column indices that are structurally unavailable.
    pub na_rows: BTreeSet<usize>,
    pub na_cols: BTreeSet<usize>,
}

impl AuditTable {
    pub fn build(
        name: impl Into<String>,
        title: impl Into<String>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        cells: Vec<Vec<u64>>,
    ) -> Self {
        assert_eq!(cells.len(), row_labels.len());
        for row in &cells {
            assert_eq!(row.len(), col_labels.len());
        }
        let row_margins: Vec<u64> = cells.iter().map(|r| r.iter().sum()).collect();
        let col_margins: Vec<u64> = (0..col_labels.len())
            .map(|c| cells.iter().map(|r| r[c]).sum())
            .collect();
        let grand_total = row_margins.iter().sum();
        Self {
            name: name.into(),
            title: title.into(),
            row_labels,
            col_labels,
            cells,
            row_margins,
            col_margins,
            grand_total,
            na_rows: BTreeSet::new(),
            na_cols: BTreeSet::new(),
        }
    }

    /// Margins must equal cell sums on both axes.
    pub fn margins_consistent(&self) -> bool {
        let rows_ok = self
            .cells
            .iter()
            .zip(&self.row_margins)
            .all(|(row, &m)| row.iter().sum::<u64>() == m);
        let cols_ok = (0..self.col_labels.len())
            .all(|c| self.cells.iter().map(|r| r[c]).sum::<u64>() == self.col_margins[c]);
        rows_ok
            && cols_ok
            && self.row_margins.iter().sum::<u64>() == self.grand_total
            && self.col_margins.iter().sum::<u64>() == self.grand_total
    }

    pub fn cell(&self, row_label: &str, col_label: &str) -> Option<u64> {
        let r = self.row_labels.iter().position(|l| l == row_label)?;
        let c = self.col_labels.iter().position(|l| l == col_label)?;
        Some(self.cells[r][c])
    }

    pub fn row_margin(&self, label: &str) -> Option<u64> {
        let r = self.row_labels.iter().position(|l| l == label)?;
        Some(self.row_margins[r])
    }

    pub fn col_margin(&self, label: &str) -> Option<u64> {
        let c = self.col_labels.iter().position(|l| l == label)?;
        Some(self.col_margins[c])
    }
}

/// Record field selectable for distributions and co-occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditField {
    Diagnosis,
    Birads,
    Density,
}

impl AuditField {
    pub fn name(self) -> &'static str {
        match self {
            AuditField::Diagnosis => "diagnosis",
            AuditField::Birads => "birads",
            AuditField::Density => "density",
        }
    }

    /// Category labels, not counting the trailing absent bucket.
    fn labels(self) -> Vec<String> {
        match self {
            AuditField::Diagnosis => ["Normal", "Benign", "Malignant", "Unknown"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            AuditField::Birads => (1..=5).map(|v| v.to_string()).collect(),
            AuditField::Density => ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Bucket index of a record, with the absent bucket last.
    fn bucket(self, record: &UnifiedRecord) -> usize {
        match self {
            AuditField::Diagnosis => match record.diagnosis {
                Diagnosis::Normal => 0,
                Diagnosis::Benign => 1,
                Diagnosis::Malignant => 2,
                Diagnosis::Unknown => 3,
            },
            AuditField::Birads => match record.birads {
                Some(b) if (1..=5).contains(&b.value()) => (b.value() - 1) as usize,
                _ => 5,
            },
            AuditField::Density => match record.density {
                Some(d) => d as usize,
                None => 4,
            },
        }
    }

    fn bucket_count(self) -> usize {
        self.labels().len() + 1
    }
}

const ABSENT: &str = "absent";

fn labels_with_absent(field: AuditField) -> Vec<String> {
    let mut labels = field.labels();
    labels.push(ABSENT.to_string());
    labels
}

/// Counts records per category of one field, with an absent bucket; the
/// total always equals the record count.
pub fn distribution(records: &[UnifiedRecord], field: AuditField) -> AuditTable {
    let mut counts = vec![0u64; field.bucket_count()];
    for record in records {
        counts[field.bucket(record)] += 1;
    }
    AuditTable::build(
        format!("distribution_{}", field.name()),
        format!("{} distribution", field.name()),
        vec!["count".to_string()],
        labels_with_absent(field),
        vec![counts],
    )
}

/// Full contingency table of two fields, absent buckets included; the grand
/// total equals the record count.
pub fn co_occurrence(
    records: &[UnifiedRecord],
    field_a: AuditField,
    field_b: AuditField,
) -> AuditTable {
    let mut cells = vec![vec![0u64; field_b.bucket_count()]; field_a.bucket_count()];
    for record in records {
        cells[field_a.bucket(record)][field_b.bucket(record)] += 1;
    }
    AuditTable::build(
        format!("cooccurrence_{}_{}", field_a.name(), field_b.name()),
        format!("{} x {} co-occurrence", field_a.name(), field_b.name()),
        labels_with_absent(field_a),
        labels_with_absent(field_b),
        cells,
    )
}

pub const ABNORMALITIES: [&str; 4] = [
    "mass",
    "calcification",
    "asymmetry",
    "architectural_distortion",
];

fn has_abnormality(record: &UnifiedRecord, abnormality: &str) -> bool {
    match abnormality {
        "mass" => record.findings.mass,
        "calcification" => record.findings.calcification,
        "asymmetry" => record.findings.asymmetry.is_some(),
        "architectural_distortion" => record.findings.architectural_distortion,
        _ => false,
    }
}

/// One assessment-by-diagnosis contingency table per abnormality, over the
/// records carrying that abnormality. Row margins give the counts by
/// BI-RADS, column margins the counts by diagnosis, and the grand total the
/// abnormality total; a record with several abnormalities counts once per
/// abnormality.
pub fn abnormality_table(records: &[UnifiedRecord]) -> Vec<AuditTable> {
    let dataset = single_dataset(records);
    ABNORMALITIES
        .iter()
        .map(|&abnormality| {
            let subset: Vec<UnifiedRecord> = records
                .iter()
                .filter(|r| has_abnormality(r, abnormality))
                .cloned()
                .collect();
            let mut table = co_occurrence(&subset, AuditField::Birads, AuditField::Diagnosis);
            table.name = format!("abnormality_{abnormality}");
            table.title = format!("{abnormality} by assessment and diagnosis");
            mark_na(&mut table, dataset);
            table
        })
        .collect()
}

fn single_dataset(records: &[UnifiedRecord]) -> Option<Dataset> {
    let mut datasets = records.iter().map(|r| r.dataset);
    let first = datasets.next()?;
    datasets.all(|d| d == first).then_some(first)
}

/// Marks the structurally-unavailable axes for a dataset: no biopsy labels
/// means every diagnosis column except Unknown is N/A; datasets with biopsy
/// labels never produce Unknown; a dataset with no normal cases has no
/// Normal column; finding annotations absent below BI-RADS 3 make those
/// assessment rows N/A.
fn mark_na(table: &mut AuditTable, dataset: Option<Dataset>) {
    let Some(dataset) = dataset else { return };
    let col = |label: &str| table.col_labels.iter().position(|l| l == label);
    let row = |label: &str| table.row_labels.iter().position(|l| l == label);
    match dataset {
        Dataset::Vindr => {
            for label in ["Normal", "Benign", "Malignant"] {
                if let Some(c) = col(label) {
                    table.na_cols.insert(c);
                }
            }
            for label in ["1", "2"] {
                if let Some(r) = row(label) {
                    table.na_rows.insert(r);
                }
            }
        }
        Dataset::Cbis => {
            for label in ["Normal", "Unknown"] {
                if let Some(c) = col(label) {
                    table.na_cols.insert(c);
                }
            }
        }
        Dataset::Tompei => {
            if let Some(c) = col("Unknown") {
                table.na_cols.insert(c);
            }
        }
        Dataset::Store => {}
    }
}

/// Reduces image-level records to one representative per breast: finding
/// flags are OR-ed across views, labels come from the first record in view
/// order. Table-level outputs default to this granularity.
pub fn breast_level(records: &[UnifiedRecord]) -> Vec<UnifiedRecord> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, crate::model::Laterality), Vec<&UnifiedRecord>> =
        BTreeMap::new();
    for record in records {
        groups
            .entry((record.patient_id.clone(), record.laterality))
            .or_default()
            .push(record);
    }
    groups
        .into_values()
        .map(|mut members| {
            members.sort_by_key(|r| (r.view, r.image_id.clone()));
            let mut representative = members[0].clone();
            for other in &members[1..] {
                representative.findings = representative.findings.merge(&other.findings);
            }
            representative
        })
        .collect()
}

/// Fraction of images flagged per defect type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorruptionPrevalence {
    pub total_images: u64,
    pub laterality_flipped: u64,
    pub intensity_inverted: u64,
    pub laterality_flip_rate: f64,
    pub intensity_flip_rate: f64,
}

pub fn corruption_prevalence(reports: &[QcReport]) -> CorruptionPrevalence {
    let total = reports.len() as u64;
    let laterality = reports.iter().filter(|q| q.laterality_flipped).count() as u64;
    let intensity = reports.iter().filter(|q| q.intensity_inverted).count() as u64;
    let rate = |n: u64| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    CorruptionPrevalence {
        total_images: total,
        laterality_flipped: laterality,
        intensity_inverted: intensity,
        laterality_flip_rate: rate(laterality),
        intensity_flip_rate: rate(intensity),
    }
}

/// Percent of `count` in `total`, in tenths, rounded half to even.
pub fn percent_tenths(count: u64, total: u64) -> u64 {
    if total == 0 {
        return 0;
    }
    let scaled = count as u128 * 1000;
    let q = (scaled / total as u128) as u64;
    let r = scaled % total as u128;
    match (2 * r).cmp(&(total as u128)) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

/// `33.3`-style fixed one-decimal rendering of `percent_tenths`.
pub fn format_percent(count: u64, total: u64) -> String {
    let tenths = percent_tenths(count, total);
    format!("{}.{}", tenths / 10, tenths % 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Csv,
        ReportFormat::Json,
        ReportFormat::Markdown,
    ];

    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

/// Writes a table in the requested formats as `<dir>/<name>.<ext>`.
pub fn render_report(
    table: &AuditTable,
    dir: &Path,
    formats: &[ReportFormat],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for &format in formats {
        let path = dir.join(format!("{}.{}", table.name, format.extension()));
        let content = match format {
            ReportFormat::Csv => render_csv(table),
            ReportFormat::Json => {
                let mut json = serde_json::to_string_pretty(table).expect("table serializes");
                json.push('\n');
                json
            }
            ReportFormat::Markdown => render_markdown(table),
        };
        std::fs::write(path, content)?;
    }
    Ok(())
}

fn na_or(value: u64, is_na: bool) -> String {
    if is_na {
        "NA".to_string()
    } else {
        value.to_string()
    }
}

fn render_csv(table: &AuditTable) -> String {
    let mut out = String::new();
    let _ = write!(out, "\"\"");
    for label in &table.col_labels {
        let _ = write!(out, ",\"{label}\"");
    }
    out.push_str(",\"total\"\n");
    for (r, row) in table.cells.iter().enumerate() {
        let _ = write!(out, "\"{}\"", table.row_labels[r]);
        for (c, &value) in row.iter().enumerate() {
            let na = table.na_rows.contains(&r) || table.na_cols.contains(&c);
            let _ = write!(out, ",\"{}\"", na_or(value, na));
        }
        let _ = writeln!(out, ",\"{}\"", table.row_margins[r]);
    }
    let _ = write!(out, "\"total\"");
    for (c, &value) in table.col_margins.iter().enumerate() {
        let _ = write!(out, ",\"{}\"", na_or(value, table.na_cols.contains(&c)));
    }
    let _ = writeln!(out, ",\"{}\"", table.grand_total);
    out
}

fn render_markdown(table: &AuditTable) -> String {
    let mut out = format!("# {}\n\n", table.title);
    let header: Vec<String> = std::iter::once(String::new())
        .chain(table.col_labels.iter().cloned())
        .chain(["total".to_string(), "total %".to_string()])
        .collect();
    let _ = writeln!(out, "|{}|", header.join("|"));
    let _ = writeln!(out, "|{}|", vec!["---"; header.len()].join("|"));
    for (r, row) in table.cells.iter().enumerate() {
        let mut line = vec![table.row_labels[r].clone()];
        for (c, &value) in row.iter().enumerate() {
            let na = table.na_rows.contains(&r) || table.na_cols.contains(&c);
            line.push(na_or(value, na));
        }
        line.push(table.row_margins[r].to_string());
        line.push(format_percent(table.row_margins[r], table.grand_total));
        let _ = writeln!(out, "|{}|", line.join("|"));
    }
    let mut line = vec!["total".to_string()];
    for (c, &value) in table.col_margins.iter().enumerate() {
        line.push(na_or(value, table.na_cols.contains(&c)));
    }
    line.push(table.grand_total.to_string());
    line.push(format_percent(table.grand_total, table.grand_total));
    let _ = writeln!(out, "|{}|", line.join("|"));

    out.push_str("\ncolumn %: ");
    let percents: Vec<String> = table
        .col_labels
        .iter()
        .zip(&table.col_margins)
        .map(|(label, &margin)| {
            format!("{label} {}", format_percent(margin, table.grand_total))
        })
        .collect();
    let _ = writeln!(out, "{}", percents.join(", "));
    out
}

/// Renders the prevalence rates in all three formats.
pub fn render_prevalence(
    prevalence: &CorruptionPrevalence,
    dir: &Path,
    formats: &[ReportFormat],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for &format in formats {
        let path = dir.join(format!("corruption_prevalence.{}", format.extension()));
        let content = match format {
            ReportFormat::Json => {
                let mut json =
                    serde_json::to_string_pretty(prevalence).expect("prevalence serializes");
                json.push('\n');
                json
            }
            ReportFormat::Csv => format!(
                "\"metric\",\"flagged\",\"total\",\"rate\"\n\"laterality_flip\",\"{}\",\"{}\",\"{}\"\n\"intensity_flip\",\"{}\",\"{}\",\"{}\"\n",
                prevalence.laterality_flipped,
                prevalence.total_images,
                prevalence.laterality_flip_rate,
                prevalence.intensity_inverted,
                prevalence.total_images,
                prevalence.intensity_flip_rate,
            ),
            ReportFormat::Markdown => format!(
                "# corruption prevalence\n\n|metric|flagged|total|%|\n|---|---|---|---|\n|laterality flip|{}|{}|{}|\n|intensity flip|{}|{}|{}|\n",
                prevalence.laterality_flipped,
                prevalence.total_images,
                format_percent(prevalence.laterality_flipped, prevalence.total_images.max(1)),
                prevalence.intensity_inverted,
                prevalence.total_images,
                format_percent(prevalence.intensity_inverted, prevalence.total_images.max(1)),
            ),
        };
        std::fs::write(path, content)?;
    }
    Ok(())
}

/// Table-4-shaped summary built from the per-abnormality margins: one row
/// per abnormality, assessment counts, diagnosis counts, total.
pub fn abnormality_summary(tables: &[AuditTable]) -> String {
    let mut out = String::from(
        "\"abnormality\",\"birads_1\",\"birads_2\",\"birads_3\",\"birads_4\",\"birads_5\",\"birads_absent\",\"normal\",\"benign\",\"malignant\",\"unknown\",\"diagnosis_absent\",\"total\"\n",
    );
    for table in tables {
        let abnormality = table.name.trim_start_matches("abnormality_");
        let _ = write!(out, "\"{abnormality}\"");
        for (r, &margin) in table.row_margins.iter().enumerate() {
            let _ = write!(out, ",\"{}\"", na_or(margin, table.na_rows.contains(&r)));
        }
        for (c, &margin) in table.col_margins.iter().enumerate() {
            let _ = write!(out, ",\"{}\"", na_or(margin, table.na_cols.contains(&c)));
        }
        let _ = writeln!(out, ",\"{}\"", table.grand_total);
    }
    out
}

#[cfg(test)]
mod tests;
