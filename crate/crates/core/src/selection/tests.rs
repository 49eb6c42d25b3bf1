use super::*;
use crate::adapters::Draft;
use crate::model::{
    BiRadsScore, Dataset, DensityCategory, Diagnosis, FindingSet, UnifiedRecord,
};

fn draft(pid: &str, lat: Laterality, view: ViewPosition) -> Draft {
    Draft {
        image_source: PathBuf::from(format!("raw/{pid}/{lat}_{view}.dcm")),
        record: UnifiedRecord {
            dataset: Dataset::Cbis,
            patient_id: pid.to_string(),
            image_id: Some(format!("img_{pid}_{lat}{view}")),
            laterality: lat,
            view,
            age: None,
            density: Some(DensityCategory::B),
            diagnosis: Diagnosis::Benign,
            birads: Some(BiRadsScore::new(2).unwrap()),
            findings: FindingSet::default(),
            split: Split::Unsplit,
            raw_folder: format!("raw/{pid}"),
            processed_path: String::new(),
        },
    }
}

fn cbis_policy() -> SelectionPolicy {
    SelectionPolicy {
        exclusions: ExclusionRules::Full,
        split: SplitPolicy::Discard,
    }
}

fn vindr_policy() -> SelectionPolicy {
    SelectionPolicy {
        exclusions: ExclusionRules::KeepAll,
        split: SplitPolicy::Retain,
    }
}

#[test]
fn grouping_two_views_into_one_exam() {
    let drafts = vec![
        draft("P1", Laterality::L, ViewPosition::CC),
        draft("P1", Laterality::L, ViewPosition::MLO),
    ];
    let exams = assemble_exams(drafts);
    assert_eq!(exams.len(), 1);
    assert_eq!(exams[0].exam.len(), 2);
    assert!(!exams[0].duplicate_conflict);
}

#[test]
fn agreeing_duplicates_merge_with_union_of_findings() {
    let mut mass = draft("P1", Laterality::L, ViewPosition::CC);
    mass.record.findings.mass = true;
    mass.record.findings.mass_shape = Some("OVAL".into());
    let mut calc = draft("P1", Laterality::L, ViewPosition::CC);
    calc.record.findings.calcification = true;
    calc.record.image_id = Some("img_other_subset".into());

    let exams = assemble_exams(vec![mass, calc]);
    assert_eq!(exams.len(), 1);
    assert!(!exams[0].duplicate_conflict);
    let record = exams[0].exam.record(ViewPosition::CC).unwrap();
    assert!(record.findings.mass && record.findings.calcification);
    assert_eq!(record.findings.mass_shape.as_deref(), Some("OVAL"));
    // First draft keeps the identity fields.
    assert_eq!(record.image_id.as_deref(), Some("img_P1_LCC"));
}

#[test]
fn conflicting_pathology_flags_duplicate_conflict() {
    let benign = draft("P1", Laterality::L, ViewPosition::CC);
    let mut malignant = draft("P1", Laterality::L, ViewPosition::CC);
    malignant.record.diagnosis = Diagnosis::Malignant;

    let exams = assemble_exams(vec![benign, malignant]);
    assert!(exams[0].duplicate_conflict);
    let reasons = apply_exclusions(&exams[0], ExclusionRules::Full);
    assert!(reasons.contains(&ExclusionReason::DuplicateConflict));
}

#[test]
fn missing_view_excludes_under_full_rules() {
    let exams = assemble_exams(vec![draft("P1", Laterality::L, ViewPosition::CC)]);
    let reasons = apply_exclusions(&exams[0], ExclusionRules::Full);
    assert_eq!(reasons, vec![ExclusionReason::MissingView]);
    // Keep-all policies keep partial exams.
    assert!(apply_exclusions(&exams[0], ExclusionRules::KeepAll).is_empty());
}

#[test]
fn vindr_birads_zero_kept_cbis_excluded() {
    let mut cc = draft("P1", Laterality::L, ViewPosition::CC);
    let mut mlo = draft("P1", Laterality::L, ViewPosition::MLO);
    cc.record.birads = Some(BiRadsScore::new(0).unwrap());
    mlo.record.birads = Some(BiRadsScore::new(0).unwrap());

    let exams = assemble_exams(vec![cc.clone(), mlo.clone()]);
    assert_eq!(
        apply_exclusions(&exams[0], ExclusionRules::Full),
        vec![ExclusionReason::BiradsZero]
    );
    assert!(apply_exclusions(&exams[0], ExclusionRules::KeepAll).is_empty());
}

#[test]
fn split_rules() {
    // Discard: whatever the records carried becomes unsplit.
    let mut cc = draft("P1", Laterality::L, ViewPosition::CC);
    let mut mlo = draft("P1", Laterality::L, ViewPosition::MLO);
    cc.record.split = Split::Test;
    mlo.record.split = Split::Test;
    let exams = assemble_exams(vec![cc, mlo]);
    assert_eq!(resolve_split(&exams[0], SplitPolicy::Discard), Ok(Split::Unsplit));
    assert_eq!(resolve_split(&exams[0], SplitPolicy::Retain), Ok(Split::Test));

    // Retain with mixed splits excludes.
    let mut cc = draft("P2", Laterality::L, ViewPosition::CC);
    let mut mlo = draft("P2", Laterality::L, ViewPosition::MLO);
    cc.record.split = Split::Train;
    mlo.record.split = Split::Test;
    let exams = assemble_exams(vec![cc, mlo]);
    assert_eq!(
        resolve_split(&exams[0], SplitPolicy::Retain),
        Err(ExclusionReason::DuplicateConflict)
    );
}

/// The six-exam fixture: each exclusion rule hit exactly once, one exam
/// clean. Expected decisions enumerated by hand.
pub(crate) fn six_exam_fixture() -> Vec<Draft> {
    let mut drafts = Vec::new();

    // P1: clean two-view exam -> keep.
    drafts.push(draft("P1", Laterality::L, ViewPosition::CC));
    drafts.push(draft("P1", Laterality::L, ViewPosition::MLO));

    // P2: CC only -> missing_view.
    drafts.push(draft("P2", Laterality::L, ViewPosition::CC));

    // P3: diagnosis disagrees across views -> inconsistent_diagnosis.
    let mut p3_mlo = draft("P3", Laterality::R, ViewPosition::MLO);
    p3_mlo.record.diagnosis = Diagnosis::Malignant;
    drafts.push(draft("P3", Laterality::R, ViewPosition::CC));
    drafts.push(p3_mlo);

    // P4: assessment disagrees (3 vs 4) -> inconsistent_birads.
    let mut p4_cc = draft("P4", Laterality::L, ViewPosition::CC);
    let mut p4_mlo = draft("P4", Laterality::L, ViewPosition::MLO);
    p4_cc.record.birads = Some(BiRadsScore::new(3).unwrap());
    p4_mlo.record.birads = Some(BiRadsScore::new(4).unwrap());
    drafts.push(p4_cc);
    drafts.push(p4_mlo);

    // P5: BI-RADS 0 on both views -> birads_zero.
    let mut p5_cc = draft("P5", Laterality::R, ViewPosition::CC);
    let mut p5_mlo = draft("P5", Laterality::R, ViewPosition::MLO);
    p5_cc.record.birads = Some(BiRadsScore::new(0).unwrap());
    p5_mlo.record.birads = Some(BiRadsScore::new(0).unwrap());
    drafts.push(p5_cc);
    drafts.push(p5_mlo);

    // P6: repeated CC rows with conflicting pathology -> duplicate_conflict.
    let mut p6_dup = draft("P6", Laterality::L, ViewPosition::CC);
    p6_dup.record.diagnosis = Diagnosis::Malignant;
    drafts.push(draft("P6", Laterality::L, ViewPosition::CC));
    drafts.push(p6_dup);
    drafts.push(draft("P6", Laterality::L, ViewPosition::MLO));

    drafts
}

#[test]
fn six_exam_fixture_decisions() {
    let (kept, decisions) = select(six_exam_fixture(), cbis_policy());
    assert_eq!(kept.len(), 1);
    assert_eq!(decisions.len(), 6);
    assert_eq!(kept[0].exam.patient_id, "P1");

    let by_patient: std::collections::BTreeMap<&str, &SelectionDecision> = decisions
        .iter()
        .map(|d| (d.patient_id.as_str(), d))
        .collect();
    assert_eq!(by_patient["P1"].outcome, Outcome::Keep);
    assert!(by_patient["P1"].reasons.is_empty());
    assert_eq!(by_patient["P2"].reasons, vec![ExclusionReason::MissingView]);
    assert_eq!(
        by_patient["P3"].reasons,
        vec![ExclusionReason::InconsistentDiagnosis]
    );
    assert_eq!(
        by_patient["P4"].reasons,
        vec![ExclusionReason::InconsistentBirads]
    );
    assert_eq!(by_patient["P5"].reasons, vec![ExclusionReason::BiradsZero]);
    assert_eq!(
        by_patient["P6"].reasons,
        vec![ExclusionReason::DuplicateConflict]
    );
}

#[test]
fn partition_invariant() {
    let drafts = six_exam_fixture();
    let assembled = assemble_exams(drafts.clone());
    let (kept, decisions) = select(drafts, cbis_policy());
    assert_eq!(kept.len() + decisions.iter().filter(|d| d.outcome == Outcome::Exclude).count(), assembled.len());
    assert_eq!(decisions.len(), assembled.len());
}

#[test]
fn monotonicity_removing_a_view_flips_to_missing_view() {
    let full = vec![
        draft("P1", Laterality::L, ViewPosition::CC),
        draft("P1", Laterality::L, ViewPosition::MLO),
    ];
    let (kept, _) = select(full.clone(), cbis_policy());
    assert_eq!(kept.len(), 1);

    let partial = vec![full[0].clone()];
    let (kept, decisions) = select(partial, cbis_policy());
    assert!(kept.is_empty());
    assert_eq!(decisions[0].reasons, vec![ExclusionReason::MissingView]);
}

#[test]
fn empty_input_yields_empty_output() {
    let (kept, decisions) = select(Vec::new(), cbis_policy());
    assert!(kept.is_empty());
    assert!(decisions.is_empty());
}

#[test]
fn all_valid_keep_all_fixture_all_kept() {
    let mut drafts = Vec::new();
    for pid in ["T1", "T2", "T3"] {
        drafts.push(draft(pid, Laterality::L, ViewPosition::CC));
    }
    let (kept, decisions) = select(drafts, SelectionPolicy {
        exclusions: ExclusionRules::KeepAll,
        split: SplitPolicy::Discard,
    });
    assert_eq!(kept.len(), 3);
    assert!(decisions.iter().all(|d| d.outcome == Outcome::Keep));
}

#[test]
fn vindr_mixed_split_excluded_uniform_kept() {
    let mut cc = draft("V1", Laterality::L, ViewPosition::CC);
    let mut mlo = draft("V1", Laterality::L, ViewPosition::MLO);
    cc.record.split = Split::Train;
    mlo.record.split = Split::Train;
    let (kept, _) = select(vec![cc.clone(), mlo.clone()], vindr_policy());
    assert_eq!(kept.len(), 1);
    assert!(kept[0].exam.records().all(|r| r.split == Split::Train));

    mlo.record.split = Split::Test;
    let (kept, decisions) = select(vec![cc, mlo], vindr_policy());
    assert!(kept.is_empty());
    assert_eq!(decisions[0].reasons, vec![ExclusionReason::DuplicateConflict]);
}

#[test]
fn decisions_are_ordered_by_exam_key() {
    let drafts = vec![
        draft("B", Laterality::R, ViewPosition::CC),
        draft("A", Laterality::L, ViewPosition::CC),
        draft("B", Laterality::L, ViewPosition::CC),
    ];
    let (_, decisions) = select(drafts, SelectionPolicy {
        exclusions: ExclusionRules::KeepAll,
        split: SplitPolicy::Discard,
    });
    let keys: Vec<(String, Laterality)> = decisions
        .iter()
        .map(|d| (d.patient_id.clone(), d.laterality))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn selection_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let (_, decisions) = select(six_exam_fixture(), cbis_policy());
    let path = dir.path().join("selection_report.csv");
    write_selection_report(&decisions, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("patient_id,laterality,outcome,reasons\n"));
    assert!(text.contains("P1,L,keep,"));
    assert!(text.contains("P5,R,exclude,birads_zero"));
}
