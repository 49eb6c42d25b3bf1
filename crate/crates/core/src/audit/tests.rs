use super::*;
use crate::model::{
    BiRadsScore, DensityCategory, FindingSet, Laterality, Split, UnifiedRecord, ViewPosition,
};

fn record(pid: &str) -> UnifiedRecord {
    UnifiedRecord {
        dataset: Dataset::Tompei,
        patient_id: pid.to_string(),
        image_id: None,
        laterality: Laterality::L,
        view: ViewPosition::CC,
        age: None,
        density: None,
        diagnosis: Diagnosis::Benign,
        birads: Some(BiRadsScore::new(3).unwrap()),
        findings: FindingSet::default(),
        split: Split::Unsplit,
        raw_folder: "raw".into(),
        processed_path: String::new(),
    }
}

fn with_density(pid: &str, density: Option<DensityCategory>) -> UnifiedRecord {
    let mut r = record(pid);
    r.density = density;
    r
}

/// Independent counting oracle: a plain loop, no AuditTable machinery.
fn count_by<F: Fn(&UnifiedRecord) -> String>(records: &[UnifiedRecord], f: F) -> Vec<(String, u64)> {
    let mut counts: std::collections::BTreeMap<String, u64> = Default::default();
    for r in records {
        *counts.entry(f(r)).or_default() += 1;
    }
    counts.into_iter().collect()
}

#[test]
fn density_distribution_matches_oracle() {
    let records = vec![
        with_density("p1", Some(DensityCategory::B)),
        with_density("p2", Some(DensityCategory::B)),
        with_density("p3", Some(DensityCategory::C)),
    ];
    let table = distribution(&records, AuditField::Density);
    assert_eq!(table.cell("count", "B"), Some(2));
    assert_eq!(table.cell("count", "C"), Some(1));
    assert_eq!(table.cell("count", "A"), Some(0));
    assert_eq!(table.grand_total, 3);
    assert!(table.margins_consistent());

    let oracle = count_by(&records, |r| {
        r.density.map(|d| d.to_string()).unwrap_or("absent".into())
    });
    for (label, count) in oracle {
        assert_eq!(table.cell("count", &label), Some(count));
    }
}

#[test]
fn empty_records_all_zero() {
    let table = distribution(&[], AuditField::Diagnosis);
    assert_eq!(table.grand_total, 0);
    assert!(table.cells[0].iter().all(|&c| c == 0));
    assert!(table.margins_consistent());
}

#[test]
fn all_absent_goes_to_absent_bucket() {
    let records = vec![with_density("p1", None), with_density("p2", None)];
    let table = distribution(&records, AuditField::Density);
    assert_eq!(table.cell("count", "absent"), Some(2));
    assert_eq!(table.grand_total, 2);
}

#[test]
fn distribution_is_permutation_invariant() {
    let mut records: Vec<UnifiedRecord> = (0..20)
        .map(|i| {
            let mut r = record(&format!("p{i}"));
            r.birads = Some(BiRadsScore::new(1 + (i % 5) as u8).unwrap());
            r
        })
        .collect();
    let forward = distribution(&records, AuditField::Birads);
    records.reverse();
    records.rotate_left(7);
    let shuffled = distribution(&records, AuditField::Birads);
    assert_eq!(forward, shuffled);
}

#[test]
fn co_occurrence_counts_and_transpose() {
    let mut records = Vec::new();
    for (diag, birads) in [
        (Diagnosis::Malignant, 5),
        (Diagnosis::Malignant, 5),
        (Diagnosis::Benign, 3),
    ] {
        let mut r = record(&format!("p{}", records.len()));
        r.diagnosis = diag;
        r.birads = Some(BiRadsScore::new(birads).unwrap());
        records.push(r);
    }
    let ab = co_occurrence(&records, AuditField::Diagnosis, AuditField::Birads);
    assert_eq!(ab.cell("Malignant", "5"), Some(2));
    assert_eq!(ab.cell("Benign", "3"), Some(1));
    assert_eq!(ab.grand_total, 3);
    assert!(ab.margins_consistent());

    let ba = co_occurrence(&records, AuditField::Birads, AuditField::Diagnosis);
    for (r, row_label) in ab.row_labels.iter().enumerate() {
        for (c, col_label) in ab.col_labels.iter().enumerate() {
            assert_eq!(ab.cells[r][c], ba.cell(col_label, row_label).unwrap());
        }
    }
}

#[test]
fn single_record_single_cell() {
    let records = vec![record("p1")];
    let table = co_occurrence(&records, AuditField::Diagnosis, AuditField::Birads);
    let nonzero: u64 = table.cells.iter().flatten().sum();
    assert_eq!(nonzero, 1);
    assert_eq!(table.cell("Benign", "3"), Some(1));
}

#[test]
fn abnormality_tables_from_two_record_fixture() {
    // One mass-benign-BR3 record, one mass+calc-malignant-BR5 record.
    let mut a = record("p1");
    a.findings.mass = true;
    let mut b = record("p2");
    b.findings.mass = true;
    b.findings.calcification = true;
    b.diagnosis = Diagnosis::Malignant;
    b.birads = Some(BiRadsScore::new(5).unwrap());

    let tables = abnormality_table(&[a, b]);
    let mass = &tables[0];
    let calc = &tables[1];
    assert_eq!(mass.name, "abnormality_mass");
    assert_eq!(mass.grand_total, 2);
    assert_eq!(calc.grand_total, 1);
    assert_eq!(mass.cell("3", "Benign"), Some(1));
    assert_eq!(mass.cell("5", "Malignant"), Some(1));
    assert_eq!(calc.cell("5", "Malignant"), Some(1));
    for table in &tables {
        assert!(table.margins_consistent());
        // Counts by assessment and by diagnosis both partition the subset.
        assert_eq!(table.row_margins.iter().sum::<u64>(), table.grand_total);
        assert_eq!(table.col_margins.iter().sum::<u64>(), table.grand_total);
    }
    // TOMPEI has biopsy labels: only the Unknown column is structurally NA.
    let unknown_col = mass.col_labels.iter().position(|l| l == "Unknown").unwrap();
    assert!(mass.na_cols.contains(&unknown_col));
}

#[test]
fn vindr_na_axes() {
    let mut r = record("p1");
    r.dataset = Dataset::Vindr;
    r.diagnosis = Diagnosis::Unknown;
    r.split = Split::Train;
    r.findings.mass = true;
    let tables = abnormality_table(&[r]);
    let mass = &tables[0];
    for label in ["Normal", "Benign", "Malignant"] {
        let c = mass.col_labels.iter().position(|l| l == label).unwrap();
        assert!(mass.na_cols.contains(&c), "{label}");
    }
    for label in ["1", "2"] {
        let r = mass.row_labels.iter().position(|l| l == label).unwrap();
        assert!(mass.na_rows.contains(&r), "{label}");
    }
}

#[test]
fn breast_level_dedupes_and_unions_flags() {
    let mut cc = record("p1");
    cc.findings.mass = true;
    let mut mlo = record("p1");
    mlo.view = ViewPosition::MLO;
    mlo.findings.calcification = true;
    let mut other = record("p2");
    other.laterality = Laterality::R;

    let reduced = breast_level(&[cc, mlo, other]);
    assert_eq!(reduced.len(), 2);
    let p1 = reduced.iter().find(|r| r.patient_id == "p1").unwrap();
    assert!(p1.findings.mass && p1.findings.calcification);
    assert_eq!(p1.view, ViewPosition::CC);
}

#[test]
fn prevalence_arithmetic() {
    use crate::model::ImageKey;
    use crate::pipeline::NormalizationParams;
    let mk = |flipped: bool, inverted: bool| QcReport {
        key: ImageKey::new("p", Laterality::L, ViewPosition::CC),
        declared_laterality: Laterality::L,
        detected_laterality: Laterality::L,
        laterality_tie: false,
        laterality_confidence: 1.0,
        laterality_flipped: flipped,
        mirrored: false,
        intensity_inverted: inverted,
        intensity_confidence: 1.0,
        source_bit_depth: 16,
        source_stored_bits: 16,
        normalization: NormalizationParams {
            min_in: 0,
            max_in: 65535,
            target_bits: 16,
        },
        warnings: Vec::new(),
    };
    let mut reports = vec![mk(true, false), mk(true, false), mk(true, true)];
    reports.extend((0..7).map(|_| mk(false, false)));
    let p = corruption_prevalence(&reports);
    assert_eq!(p.total_images, 10);
    assert_eq!(p.laterality_flip_rate, 0.3);
    assert_eq!(p.intensity_flip_rate, 0.1);

    let empty = corruption_prevalence(&[]);
    assert_eq!(empty.laterality_flip_rate, 0.0);
}

#[test]
fn half_even_percentages() {
    assert_eq!(format_percent(1, 3), "33.3");
    assert_eq!(format_percent(2, 3), "66.7");
    assert_eq!(format_percent(1, 400), "0.2"); // 0.25 rounds to even
    assert_eq!(format_percent(3, 400), "0.8"); // 0.75 rounds to even
    assert_eq!(format_percent(1, 1), "100.0");
    assert_eq!(format_percent(0, 5), "0.0");
}

#[test]
fn csv_render_round_trips_counts() {
    let records = vec![
        with_density("p1", Some(DensityCategory::A)),
        with_density("p2", Some(DensityCategory::D)),
        with_density("p3", None),
    ];
    let table = distribution(&records, AuditField::Density);
    let dir = tempfile::tempdir().unwrap();
    render_report(&table, dir.path(), &ReportFormat::ALL).unwrap();

    let text = std::fs::read_to_string(dir.path().join("distribution_density.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers[1..headers.len() - 1], table.col_labels[..]);
    let row = reader.records().next().unwrap().unwrap();
    let parsed: Vec<u64> = (1..=table.col_labels.len())
        .map(|i| row.get(i).unwrap().parse().unwrap())
        .collect();
    assert_eq!(parsed, table.cells[0]);
    // Explicit zeros, never blanks.
    assert!(parsed.contains(&0));

    let md = std::fs::read_to_string(dir.path().join("distribution_density.md")).unwrap();
    assert!(md.contains("33.3"));
    assert!(std::fs::metadata(dir.path().join("distribution_density.json")).is_ok());
}

#[test]
fn na_cells_render_as_na_not_zero() {
    let mut r = record("p1");
    r.dataset = Dataset::Vindr;
    r.diagnosis = Diagnosis::Unknown;
    r.findings.mass = true;
    let tables = abnormality_table(&[r]);
    let dir = tempfile::tempdir().unwrap();
    render_report(&tables[0], dir.path(), &[ReportFormat::Csv]).unwrap();
    let text = std::fs::read_to_string(dir.path().join("abnormality_mass.csv")).unwrap();
    assert!(text.contains("\"NA\""));

    let summary = abnormality_summary(&tables);
    assert!(summary.contains("\"NA\""));
    assert!(summary.lines().count() == 1 + ABNORMALITIES.len());
}
