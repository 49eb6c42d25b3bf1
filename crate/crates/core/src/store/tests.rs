use super::*;
use crate::model::{BiRadsScore, DensityCategory, Diagnosis, FindingSet, Split, ViewPosition};
use crate::pipeline::{normalize_dynamic_range, process_image};
use crate::synth;

use tempfile::tempdir;

fn record(pid: &str, lat: Laterality, view: ViewPosition) -> UnifiedRecord {
    UnifiedRecord {
        dataset: Dataset::Cbis,
        patient_id: pid.to_string(),
        image_id: Some(format!("img_{pid}{lat}{view}")),
        laterality: lat,
        view,
        age: Some(51),
        density: Some(DensityCategory::C),
        diagnosis: Diagnosis::Benign,
        birads: Some(BiRadsScore::new(3).unwrap()),
        findings: FindingSet {
            mass: true,
            mass_shape: Some("OVAL".into()),
            ..FindingSet::default()
        },
        split: Split::Unsplit,
        raw_folder: format!("Mass-Training_{pid}"),
        processed_path: format!("{pid}/{lat}_{view}.png"),
    }
}

fn processed(pid: &str, lat: Laterality, view: ViewPosition, seed: u64) -> ProcessedImage {
    let record = record(pid, lat, view);
    let raw = synth::small_canonical(seed);
    let meta = crate::imgio::SourceImageMeta {
        photometric: None,
        stored_bits: 8,
        path: Default::default(),
        rescale: None,
    };
    let (image, qc) = process_image(
        record.key(),
        raw,
        lat,
        &meta,
        &crate::pipeline::DetectorConfig::default(),
    );
    ProcessedImage { record, image, qc }
}

fn sample_store(root: &std::path::Path) -> StoreManifest {
    let items = vec![
        processed("p1", Laterality::L, ViewPosition::CC, 1),
        processed("p1", Laterality::L, ViewPosition::MLO, 2),
        processed("p1", Laterality::R, ViewPosition::CC, 3),
        processed("p1", Laterality::R, ViewPosition::MLO, 4),
        processed("p2", Laterality::L, ViewPosition::CC, 5),
        processed("p2", Laterality::L, ViewPosition::MLO, 6),
    ];
    write_store(items, root, Dataset::Cbis, "fp0").unwrap()
}

#[test]
fn patient_folder_layout() {
    let dir = tempdir().unwrap();
    let manifest = sample_store(dir.path());
    assert_eq!(manifest.patients, 2);
    assert_eq!(manifest.images, 6);
    for name in ["L_CC.png", "L_MLO.png", "R_CC.png", "R_MLO.png"] {
        assert!(dir.path().join("p1").join(name).exists(), "{name}");
    }
    assert!(dir.path().join("p1/meta.txt").exists());
    assert!(dir.path().join("manifest.json").exists());
    assert!(!dir.path().join(SENTINEL).exists());
}

#[test]
fn read_write_round_trip_is_identity() {
    let dir = tempdir().unwrap();
    let items = vec![
        processed("p1", Laterality::L, ViewPosition::CC, 1),
        processed("p2", Laterality::R, ViewPosition::MLO, 2),
    ];
    let written: Vec<UnifiedRecord> = {
        let mut r: Vec<UnifiedRecord> = items.iter().map(|i| i.record.clone()).collect();
        r.sort_by_key(|r| r.sort_key());
        r
    };
    write_store(items, dir.path(), Dataset::Cbis, "fp0").unwrap();
    let (read, manifest) = read_store(dir.path()).unwrap();
    assert_eq!(read, written);
    assert_eq!(manifest.dataset, Dataset::Cbis);
    assert_eq!(manifest.root, dir.path());
}

#[test]
fn rewrite_is_byte_identical() {
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();
    sample_store(dir_a.path());
    sample_store(dir_b.path());
    for file in ["metadata.csv", "manifest.json", "qc_report.csv"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn empty_store_has_header_only_metadata() {
    let dir = tempdir().unwrap();
    let manifest = write_store(Vec::new(), dir.path(), Dataset::Tompei, "fp0").unwrap();
    assert_eq!(manifest.patients, 0);
    assert_eq!(manifest.images, 0);
    let text = std::fs::read_to_string(dir.path().join("metadata.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let (records, _) = read_store(dir.path()).unwrap();
    assert!(records.is_empty());
}

#[test]
fn duplicate_slot_is_a_filename_collision() {
    let dir = tempdir().unwrap();
    let mut a = processed("p1", Laterality::L, ViewPosition::CC, 1);
    let b = processed("p1", Laterality::L, ViewPosition::CC, 2);
    a.record.image_id = Some("img_different".into());
    match write_store(vec![a, b], dir.path(), Dataset::Cbis, "fp0") {
        Err(StoreError::FilenameCollision { .. }) => {}
        other => panic!("expected collision, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn missing_image_is_reported_with_path() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    std::fs::remove_file(dir.path().join("p1/L_CC.png")).unwrap();
    match read_store(dir.path()) {
        Err(StoreError::MissingFiles { count, listing }) => {
            assert_eq!(count, 1);
            assert!(listing.contains("p1/L_CC.png"));
        }
        other => panic!("expected missing-files, got {:?}", other.map(|_| ())),
    }
    // The tolerant reader still works.
    assert!(read_records(dir.path()).is_ok());
}

#[test]
fn schema_version_mismatch_is_explicit() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    let manifest_path = dir.path().join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .unwrap()
        .replace(SCHEMA_VERSION, "0.9.0");
    std::fs::write(&manifest_path, text).unwrap();
    match read_store(dir.path()) {
        Err(StoreError::SchemaVersionMismatch { found, .. }) => assert_eq!(found, "0.9.0"),
        other => panic!("expected version mismatch, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn sentinel_marks_incomplete_store() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    std::fs::write(dir.path().join(SENTINEL), "in progress\n").unwrap();
    assert!(matches!(
        read_store(dir.path()),
        Err(StoreError::IncompleteStore { .. })
    ));
}

#[test]
fn validate_clean_store_is_empty() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    let violations = validate_store(dir.path(), &DetectorConfig::default());
    assert_eq!(violations, Vec::new());
}

#[test]
fn validate_flags_mirrored_image() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    let path = dir.path().join("p1/L_CC.png");
    let (image, _) = read_image(&path).unwrap();
    write_image(&crate::pipeline::mirror_horizontal(&image), &path).unwrap();

    let violations = validate_store(dir.path(), &DetectorConfig::default());
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0].rule, "orientation");
    assert!(violations[0].field.contains("p1/L_CC"));
}

#[test]
fn validate_flags_8bit_image() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    // Overwrite one stored PNG with an 8-bit file, bypassing write_image.
    let path = dir.path().join("p2/L_CC.png");
    {
        let file = std::fs::File::create(&path).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 4, 2);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0, 255, 1, 2, 3, 4, 5, 255]).unwrap();
    }
    let violations = validate_store(dir.path(), &DetectorConfig::default());
    assert!(violations.iter().any(|v| v.rule == "bit-depth"));
}

#[test]
fn validate_flags_compressed_dynamic_range() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    let path = dir.path().join("p2/L_MLO.png");
    let (image, _) = read_image(&path).unwrap();
    // Halve the range: no longer full-scale, not constant either.
    let squashed: Vec<u16> = image.samples().iter().map(|&v| v / 2 + 10).collect();
    let squashed = ImageBuffer::new(image.width(), image.height(), BitDepth::Sixteen, squashed).unwrap();
    write_image(&squashed, &path).unwrap();
    let violations = validate_store(dir.path(), &DetectorConfig::default());
    assert!(violations.iter().any(|v| v.rule == "dynamic-range"));
}

#[test]
fn meta_txt_blocks_per_laterality() {
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    let text = std::fs::read_to_string(dir.path().join("p1/meta.txt")).unwrap();
    assert!(text.starts_with("patient: p1\n"));
    assert!(text.contains("\nlaterality: L\n"));
    assert!(text.contains("\nlaterality: R\n"));
    assert!(text.contains("age: 51"));
    assert!(text.contains("density: C"));
    assert!(text.contains("diagnosis: Benign"));
    assert!(text.contains("birads: 3"));
}

#[test]
fn qc_round_trips_through_csv() {
    let dir = tempdir().unwrap();
    let items = vec![
        processed("p1", Laterality::L, ViewPosition::CC, 1),
        processed("p2", Laterality::R, ViewPosition::MLO, 9),
    ];
    let mut expected: Vec<QcReport> = items.iter().map(|i| i.qc.clone()).collect();
    expected.sort_by_key(|q| q.key.clone());
    write_store(items, dir.path(), Dataset::Cbis, "fp0").unwrap();
    let read = read_qc(dir.path()).unwrap();
    assert_eq!(read, expected);
}

#[test]
fn normalized_idempotence_on_stored_images() {
    // Stored images re-normalize to themselves: full range in, identity out.
    let dir = tempdir().unwrap();
    sample_store(dir.path());
    let (image, _) = read_image(&dir.path().join("p1/L_CC.png")).unwrap();
    let (renorm, params) = normalize_dynamic_range(&image);
    assert_eq!(renorm, image);
    assert_eq!((params.min_in, params.max_in), (0, u16::MAX));
}
