//! Breast-level exam assembly and the inclusion/exclusion and split rules.
//!
//! Exams are defined on a breast basis: all views of one breast of one
//! patient. Selection is a pure function of the drafts; every assembled
//! exam lands in exactly one decision, ordered by exam key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::adapters::Draft;
use crate::model::{BiRadsScore, Exam, Laterality, Split, UnifiedRecord, ViewPosition};

/// Why an exam was excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    MissingView,
    InconsistentDiagnosis,
    InconsistentBirads,
    BiradsZero,
    DuplicateConflict,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::MissingView => "missing_view",
            ExclusionReason::InconsistentDiagnosis => "inconsistent_diagnosis",
            ExclusionReason::InconsistentBirads => "inconsistent_birads",
            ExclusionReason::BiradsZero => "birads_zero",
            ExclusionReason::DuplicateConflict => "duplicate_conflict",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Keep,
    Exclude,
}

/// One decision per assembled exam; exclude implies at least one reason,
/// keep implies none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionDecision {
    pub patient_id: String,
    pub laterality: Laterality,
    pub outcome: Outcome,
    pub reasons: Vec<ExclusionReason>,
}

/// Which exclusion rule set applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionRules {
    /// Missing view, inconsistent diagnosis or assessment, assessment 0,
    /// and duplicate conflicts all exclude.
    Full,
    /// Keep everything structurally storable; only duplicate-key conflicts
    /// exclude, since two different records cannot share one image slot.
    KeepAll,
}

/// What happens to the source train/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPolicy {
    /// Predefined split discarded (patient overlap makes it unusable).
    Discard,
    /// Split carried by the records, which must agree across views.
    Retain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionPolicy {
    pub exclusions: ExclusionRules,
    pub split: SplitPolicy,
}

/// An exam plus adapter-side bookkeeping: source image paths per view and
/// whether assembly hit an unmergeable duplicate.
#[derive(Debug, Clone)]
pub struct AssembledExam {
    pub exam: Exam,
    pub sources: BTreeMap<ViewPosition, PathBuf>,
    pub duplicate_conflict: bool,
}

/// A kept exam ready for image processing.
#[derive(Debug, Clone)]
pub struct SelectedExam {
    pub exam: Exam,
    pub sources: BTreeMap<ViewPosition, PathBuf>,
}

/// Groups drafts by (patient, laterality) and merges duplicate view entries.
/// Duplicates merge when their label fields agree (findings are unioned,
/// the first draft keeps the identity fields); disagreement flags the exam.
pub fn assemble_exams(drafts: Vec<Draft>) -> Vec<AssembledExam> {
    let mut groups: BTreeMap<(String, Laterality), Vec<Draft>> = BTreeMap::new();
    for draft in drafts {
        groups
            .entry((draft.record.patient_id.clone(), draft.record.laterality))
            .or_default()
            .push(draft);
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((patient_id, laterality), members) in groups {
        let mut views: BTreeMap<ViewPosition, (UnifiedRecord, PathBuf)> = BTreeMap::new();
        let mut conflict = false;
        for draft in members {
            let view = draft.record.view;
            match views.get_mut(&view) {
                None => {
                    views.insert(view, (draft.record, draft.image_source));
                }
                Some((existing, _)) => match merge_records(existing, &draft.record) {
                    Some(merged) => *existing = merged,
                    None => conflict = true,
                },
            }
        }
        let mut exam = Exam::new(patient_id, laterality);
        let mut sources = BTreeMap::new();
        for (view, (record, source)) in views {
            sources.insert(view, source);
            exam.insert(record).expect("one record per view by construction");
        }
        out.push(AssembledExam {
            exam,
            sources,
            duplicate_conflict: conflict,
        });
    }
    out
}

/// Merges two drafts describing the same image slot. Label fields must
/// agree; findings are unioned. `None` means the records conflict.
fn merge_records(a: &UnifiedRecord, b: &UnifiedRecord) -> Option<UnifiedRecord> {
    let labels_agree = a.diagnosis == b.diagnosis
        && a.birads == b.birads
        && a.density == b.density
        && a.age == b.age
        && a.split == b.split;
    if !labels_agree {
        return None;
    }
    let mut merged = a.clone();
    merged.findings = a.findings.merge(&b.findings);
    Some(merged)
}

/// Applies the configured exclusion rules to one assembled exam.
pub fn apply_exclusions(assembled: &AssembledExam, rules: ExclusionRules) -> Vec<ExclusionReason> {
    let mut reasons = Vec::new();
    if assembled.duplicate_conflict {
        reasons.push(ExclusionReason::DuplicateConflict);
    }
    if rules == ExclusionRules::KeepAll {
        return reasons;
    }

    let exam = &assembled.exam;
    if !exam.has_view(ViewPosition::CC) || !exam.has_view(ViewPosition::MLO) {
        reasons.push(ExclusionReason::MissingView);
    }
    if exam.len() > 1 && exam.diagnosis().is_none() {
        reasons.push(ExclusionReason::InconsistentDiagnosis);
    }
    let birads: Vec<Option<BiRadsScore>> = exam.records().map(|r| r.birads).collect();
    if birads.windows(2).any(|w| w[0] != w[1]) {
        reasons.push(ExclusionReason::InconsistentBirads);
    }
    if birads.iter().any(|b| b.map(BiRadsScore::value) == Some(0)) {
        reasons.push(ExclusionReason::BiradsZero);
    }
    reasons.sort_unstable();
    reasons.dedup();
    reasons
}

/// Resolves the exam's split under the policy. Retained splits must agree
/// across views; disagreement is a duplicate conflict.
pub fn resolve_split(
    assembled: &AssembledExam,
    policy: SplitPolicy,
) -> Result<Split, ExclusionReason> {
    match policy {
        SplitPolicy::Discard => Ok(Split::Unsplit),
        SplitPolicy::Retain => {
            let mut splits = assembled.exam.records().map(|r| r.split);
            let first = splits.next().expect("assembled exams are nonempty");
            if splits.all(|s| s == first) {
                Ok(first)
            } else {
                Err(ExclusionReason::DuplicateConflict)
            }
        }
    }
}

/// Full selection: assemble, exclude, resolve splits. Kept exams have their
/// records' split rewritten to the resolved value.
pub fn select(drafts: Vec<Draft>, policy: SelectionPolicy) -> (Vec<SelectedExam>, Vec<SelectionDecision>) {
    let assembled = assemble_exams(drafts);
    let mut kept = Vec::new();
    let mut decisions = Vec::with_capacity(assembled.len());

    for mut item in assembled {
        let mut reasons = apply_exclusions(&item, policy.exclusions);
        let split = match resolve_split(&item, policy.split) {
            Ok(split) => Some(split),
            Err(reason) => {
                reasons.push(reason);
                None
            }
        };
        reasons.sort_unstable();
        reasons.dedup();

        let (patient_id, laterality) = item.exam.key();
        if reasons.is_empty() {
            let split = split.expect("split resolved for kept exam");
            for view in ViewPosition::ALL {
                if let Some(record) = item.exam.record_mut(view) {
                    record.split = split;
                }
            }
            decisions.push(SelectionDecision {
                patient_id,
                laterality,
                outcome: Outcome::Keep,
                reasons: Vec::new(),
            });
            kept.push(SelectedExam {
                exam: item.exam,
                sources: item.sources,
            });
        } else {
            decisions.push(SelectionDecision {
                patient_id,
                laterality,
                outcome: Outcome::Exclude,
                reasons,
            });
        }
    }
    (kept, decisions)
}

/// Writes the selection audit table: exam key, outcome, reasons.
pub fn write_selection_report(
    decisions: &[SelectionDecision],
    path: &Path,
) -> std::io::Result<()> {
    let mut out = String::from("patient_id,laterality,outcome,reasons\n");
    for d in decisions {
        let reasons: Vec<&str> = d.reasons.iter().map(|r| r.as_str()).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            d.patient_id,
            d.laterality,
            match d.outcome {
                Outcome::Keep => "keep",
                Outcome::Exclude => "exclude",
            },
            reasons.join(";")
        ));
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests;
