//! End-to-end runs of the mammoprep binary over a small synthetic CBIS-style
//! source tree: harmonize, validate, audit, inject, re-harmonize, restore.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn mammoprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mammoprep"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

/// Writes a 16-bit grayscale PNG with tissue texture on one side and a zero
/// background on the other.
fn write_side_image(path: &Path, tissue_left: bool, seed: u64) {
    let (w, h) = (64u32, 48u32);
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut samples = vec![0u16; (w * h) as usize];
    for y in 0..h as usize {
        for x in 0..w as usize {
            let in_tissue = if tissue_left { x < (w as usize) / 2 } else { x >= (w as usize) / 2 };
            if in_tissue {
                samples[y * w as usize + x] = 1 + (next() % 65535) as u16;
            }
        }
    }
    // Pin full range so normalization is the identity scaling.
    let first_tissue = if tissue_left { 0 } else { (w as usize) / 2 };
    samples[first_tissue] = u16::MAX;

    fs::create_dir_all(path.parent().unwrap()).unwrap();
    let file = fs::File::create(path).unwrap();
    let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc.write_header().unwrap();
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
    writer.write_image_data(&bytes).unwrap();
}

const MASS_HEADER: &str = "patient_id,breast_density,left or right breast,image view,abnormality id,abnormality type,mass shape,mass margins,assessment,pathology,subtlety,image file path\n";
const CALC_HEADER: &str = "patient_id,breast density,left or right breast,image view,abnormality id,abnormality type,calc type,calc distribution,assessment,pathology,subtlety,image file path\n";

/// Builds a CBIS-style source: 3 patients x 1 breast x 2 views, all valid.
/// Patient P_3's breast is RIGHT (tissue on the right in the raw image).
fn build_cbis_source(root: &Path) {
    let mut mass_rows = String::from(MASS_HEADER);
    let mut seed = 1u64;
    for (patient, side, pathology, density, assessment) in [
        ("P_1", "LEFT", "MALIGNANT", "2", "5"),
        ("P_2", "LEFT", "BENIGN", "3", "2"),
        ("P_3", "RIGHT", "BENIGN_WITHOUT_CALLBACK", "1", "3"),
    ] {
        for view in ["CC", "MLO"] {
            let rel = format!("Mass-Training_{patient}_{side}_{view}/img.png");
            mass_rows.push_str(&format!(
                "{patient},{density},{side},{view},1,mass,OVAL,CIRCUMSCRIBED,{assessment},{pathology},3,{rel}\n"
            ));
            write_side_image(&root.join(&rel), side == "LEFT", seed);
            seed += 1;
        }
    }
    fs::write(root.join("mass_case_description_train_set.csv"), mass_rows).unwrap();
    fs::write(root.join("mass_case_description_test_set.csv"), MASS_HEADER).unwrap();
    fs::write(root.join("calc_case_description_train_set.csv"), CALC_HEADER).unwrap();
    fs::write(root.join("calc_case_description_test_set.csv"), CALC_HEADER).unwrap();
}

fn write_config(dir: &Path, cbis_root: &Path, output_root: &Path) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    fs::write(
        &path,
        format!(
            "cbis_root = {}\noutput_root = {}\nworkers = 2\n",
            cbis_root.display(),
            output_root.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn harmonize_validate_audit_inject_cycle() {
    let dir = tempdir().unwrap();
    let cbis = dir.path().join("cbis");
    let store = dir.path().join("store");
    fs::create_dir_all(&cbis).unwrap();
    build_cbis_source(&cbis);
    let config = write_config(dir.path(), &cbis, &store);
    let config = config.to_str().unwrap();

    // Harmonize.
    let out = mammoprep(&["--config", config, "harmonize", "--dataset", "cbis"]);
    assert!(out.status.success(), "harmonize failed: {out:?}");
    let text = stdout(&out);
    assert!(text.contains("exams: 3 kept, 0 excluded"), "{text}");
    assert!(text.contains("images: 6 written, 0 missing"), "{text}");
    assert!(store.join("metadata.csv").exists());
    assert!(store.join("selection_report.csv").exists());

    // Validate: clean store exits 0.
    let out = mammoprep(&["--config", config, "validate"]);
    assert!(out.status.success(), "validate failed: {out:?}");
    assert!(stdout(&out).contains("is valid"));

    // Audit: tables land under audit/cbis.
    let out = mammoprep(&["--config", config, "audit"]);
    assert!(out.status.success(), "audit failed: {out:?}");
    let audit_dir = store.join("audit/cbis");
    for table in [
        "distribution_density_breast.csv",
        "distribution_birads_image.md",
        "cooccurrence_diagnosis_birads_breast.json",
        "abnormality_mass.csv",
        "abnormality_summary.csv",
        "corruption_prevalence.json",
    ] {
        assert!(audit_dir.join(table).exists(), "missing {table}");
    }

    // Inject: mirror every image (q=1) and check validate now fails with
    // orientation violations on every image.
    let corrupted = dir.path().join("corrupted");
    let out = mammoprep(&[
        "--config",
        config,
        "inject",
        "--store",
        store.to_str().unwrap(),
        "--out",
        corrupted.to_str().unwrap(),
        "--q",
        "1",
        "--seed",
        "7",
    ]);
    assert!(out.status.success(), "inject failed: {out:?}");
    assert!(corrupted.join("injection_plan.json").exists());

    let out = mammoprep(&[
        "--config",
        config,
        "validate",
        "--store",
        corrupted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "corrupted store must fail validation");
    let text = stdout(&out);
    assert_eq!(text.matches("orientation").count(), 6, "{text}");

    // Re-harmonize the corrupted store; pixels must match the clean store.
    let restored = dir.path().join("restored");
    let mut conf2 = fs::read_to_string(config).unwrap();
    conf2.push_str(&format!(
        "store_root = {}\n",
        corrupted.display()
    ));
    let config2 = dir.path().join("run2.conf");
    fs::write(&config2, conf2).unwrap();
    let out = mammoprep(&[
        "--config",
        config2.to_str().unwrap(),
        "harmonize",
        "--dataset",
        "store",
        "--output",
        restored.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "store re-harmonize failed: {out:?}");
    // Re-detected laterality contradictions are visible in the QC rates.
    assert!(stdout(&out).contains("laterality flip rate"));

    let mut compared = 0;
    for entry in fs::read_dir(&store).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_dir() && entry.file_name() != "audit" {
            for file in fs::read_dir(entry.path()).unwrap() {
                let file = file.unwrap();
                if file.path().extension().is_some_and(|e| e == "png") {
                    let original = fs::read(file.path()).unwrap();
                    let restored_file = restored
                        .join(entry.file_name())
                        .join(file.file_name());
                    let restored_bytes = fs::read(&restored_file)
                        .unwrap_or_else(|_| panic!("missing {}", restored_file.display()));
                    assert_eq!(original, restored_bytes, "{:?}", file.path());
                    compared += 1;
                }
            }
        }
    }
    assert_eq!(compared, 6);
}

#[test]
fn unreadable_root_is_a_config_error() {
    let dir = tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &dir.path().join("does-not-exist"),
        &dir.path().join("out"),
    );
    let out = mammoprep(&[
        "--config",
        config.to_str().unwrap(),
        "harmonize",
        "--dataset",
        "cbis",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config-error"));
}

#[test]
fn unknown_dataset_is_a_config_error() {
    let out = mammoprep(&["harmonize", "--dataset", "ddsm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempdir().unwrap();
    let cbis = dir.path().join("cbis");
    fs::create_dir_all(&cbis).unwrap();
    build_cbis_source(&cbis);

    let mut manifests = Vec::new();
    let mut metadatas = Vec::new();
    for run in 0..2 {
        let store = dir.path().join(format!("store{run}"));
        let config = dir.path().join(format!("run{run}.conf"));
        fs::write(
            &config,
            format!(
                "cbis_root = {}\noutput_root = {}\nworkers = {}\n",
                cbis.display(),
                store.display(),
                run + 1
            ),
        )
        .unwrap();
        let out = mammoprep(&[
            "--config",
            config.to_str().unwrap(),
            "harmonize",
            "--dataset",
            "cbis",
        ]);
        assert!(out.status.success());
        manifests.push(fs::read(store.join("manifest.json")).unwrap());
        metadatas.push(fs::read(store.join("metadata.csv")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
    assert_eq!(metadatas[0], metadatas[1]);
}

#[test]
fn audit_of_missing_store_fails_with_validation_code() {
    let dir = tempdir().unwrap();
    let out = mammoprep(&[
        "audit",
        "--store",
        dir.path().join("nope").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}
