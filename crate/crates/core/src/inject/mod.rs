//! Deterministic corruption injection: re-introduces the two defect classes
//! into a clean store at exact fractions for robustness experiments.
//!
//! Intensity inversion is patient-scoped (every image of a chosen patient),
//! horizontal flipping image-scoped, matching how the degradation
//! experiments were set up. Selection shuffles lexicographically sorted
//! keys with a seeded generator, so plans are independent of filesystem
//! enumeration order and byte-reproducible across runs and platforms.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgio::{read_image, write_image};
use crate::model::UnifiedRecord;
use crate::pipeline::{invert_intensity, mirror_horizontal};
use crate::store::{read_records, StoreError};

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("store has no images to corrupt")]
    EmptyStore,
    #[error("invalid fraction {raw:?}: {detail}")]
    BadFraction { raw: String, detail: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Image(#[from] crate::imgio::ImageIoError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("plan does not match store: {detail}")]
    PlanMismatch { detail: String },
}

/// A fraction parsed from its decimal spelling and kept exact, so the
/// affected count is the mathematical floor(p * N) with no float rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactFraction {
    numerator: u128,
    denominator: u128,
    raw: String,
}

impl ExactFraction {
    pub fn zero() -> Self {
        "0".parse().expect("zero parses")
    }

    pub fn floor_of(&self, n: u64) -> u64 {
        (n as u128 * self.numerator / self.denominator) as u64
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

impl FromStr for ExactFraction {
    type Err = InjectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = s.trim().to_string();
        let bad = |detail: &str| InjectError::BadFraction {
            raw: raw.clone(),
            detail: detail.to_string(),
        };
        let (int_part, frac_part) = match raw.split_once('.') {
            Some((i, f)) => (i, f),
            None => (raw.as_str(), ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad("empty"));
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad("expected a non-negative decimal"));
        }
        if frac_part.len() > 18 {
            return Err(bad("too many decimal places"));
        }
        let denominator = 10u128.pow(frac_part.len() as u32);
        let int_value: u128 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad("integer part overflow"))?
        };
        let frac_value: u128 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad("fraction part overflow"))?
        };
        let numerator = int_value
            .checked_mul(denominator)
            .and_then(|v| v.checked_add(frac_value))
            .ok_or_else(|| bad("overflow"))?;
        if numerator > denominator {
            return Err(bad("fractions must be within [0, 1]"));
        }
        Ok(Self {
            numerator,
            denominator,
            raw,
        })
    }
}

/// Which store entries each defect hits. Equal seed, fractions and store
/// contents produce identical plans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub seed: u64,
    pub intensity_fraction: String,
    pub laterality_fraction: String,
    /// Patients whose every image gets its intensities inverted.
    pub intensity_patients: Vec<String>,
    /// Stored image paths (relative to the store root) that get mirrored.
    pub laterality_images: Vec<String>,
}

/// Rejection-sampled uniform draw in `[0, n)`.
fn bounded(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n; // 2^64 mod n
    loop {
        let v = rng.next_u64();
        if v >= threshold {
            return v % n;
        }
    }
}

fn seeded_prefix(mut items: Vec<String>, fraction: &ExactFraction, rng: &mut ChaCha8Rng) -> Vec<String> {
    items.sort_unstable();
    // Fisher-Yates over the sorted list.
    for i in (1..items.len()).rev() {
        let j = bounded(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
    let take = fraction.floor_of(items.len() as u64) as usize;
    let mut chosen: Vec<String> = items.into_iter().take(take).collect();
    chosen.sort_unstable();
    chosen
}

/// Builds the plan from store records: a seeded shuffle of the sorted
/// patient list picks floor(p * patients) patients for intensity inversion,
/// then a seeded shuffle of the sorted image list picks floor(q * images)
/// images for mirroring.
pub fn plan_injection(
    records: &[UnifiedRecord],
    intensity_fraction: &ExactFraction,
    laterality_fraction: &ExactFraction,
    seed: u64,
) -> Result<InjectionPlan, InjectError> {
    let images: Vec<String> = records
        .iter()
        .filter(|r| !r.processed_path.is_empty())
        .map(|r| r.processed_path.clone())
        .collect();
    if images.is_empty() {
        return Err(InjectError::EmptyStore);
    }
    let patients: Vec<String> = records
        .iter()
        .map(|r| r.patient_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intensity_patients = seeded_prefix(patients, intensity_fraction, &mut rng);
    let laterality_images = seeded_prefix(images, laterality_fraction, &mut rng);

    Ok(InjectionPlan {
        seed,
        intensity_fraction: intensity_fraction.raw().to_string(),
        laterality_fraction: laterality_fraction.raw().to_string(),
        intensity_patients,
        laterality_images,
    })
}

/// Copies the store to a new root and applies the plan: inversion first,
/// then mirroring, so images hit by both defects get both. The source store
/// is never touched. The plan is written alongside as injection_plan.json.
pub fn apply_injection(
    src_root: &Path,
    plan: &InjectionPlan,
    dst_root: &Path,
) -> Result<(), InjectError> {
    let (records, _) = read_records(src_root)?;

    copy_tree(src_root, dst_root)?;

    let patients: BTreeSet<&str> = plan.intensity_patients.iter().map(String::as_str).collect();
    let known_patients: BTreeSet<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    if let Some(missing) = patients.iter().find(|p| !known_patients.contains(*p)) {
        return Err(InjectError::PlanMismatch {
            detail: format!("patient {missing} not in store"),
        });
    }

    for record in &records {
        if record.processed_path.is_empty() || !patients.contains(record.patient_id.as_str()) {
            continue;
        }
        let path = dst_root.join(&record.processed_path);
        let (image, _) = read_image(&path)?;
        write_image(&invert_intensity(&image), &path)?;
    }

    let known_paths: BTreeSet<&str> = records
        .iter()
        .map(|r| r.processed_path.as_str())
        .collect();
    for rel in &plan.laterality_images {
        if !known_paths.contains(rel.as_str()) {
            return Err(InjectError::PlanMismatch {
                detail: format!("image {rel} not in store"),
            });
        }
        let path = dst_root.join(rel);
        let (image, _) = read_image(&path)?;
        write_image(&mirror_horizontal(&image), &path)?;
    }

    let plan_path = dst_root.join("injection_plan.json");
    let mut json = serde_json::to_string_pretty(plan).expect("plan serializes");
    json.push('\n');
    std::fs::write(&plan_path, json).map_err(|source| InjectError::Io {
        path: plan_path,
        source,
    })?;
    Ok(())
}

fn copy_tree(src: &Path, dst: &Path) -> Result<(), InjectError> {
    let io_err = |path: &Path, source| InjectError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dst).map_err(|e| io_err(dst, e))?;
    let mut entries: Vec<_> = std::fs::read_dir(src)
        .map_err(|e| io_err(src, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(src, e))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let from = entry.path();
        let to = dst.join(entry.file_name());
        let kind = entry.file_type().map_err(|e| io_err(&from, e))?;
        if kind.is_dir() {
            copy_tree(&from, &to)?;
        } else {
            std::fs::copy(&from, &to).map_err(|e| io_err(&from, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, Laterality, ViewPosition};

    fn records(patients: usize, views: &[(Laterality, ViewPosition)]) -> Vec<UnifiedRecord> {
        let mut out = Vec::new();
        for p in 0..patients {
            let pid = format!("p{p:03}");
            for &(lat, view) in views {
                out.push(UnifiedRecord {
                    dataset: Dataset::Cbis,
                    patient_id: pid.clone(),
                    image_id: None,
                    laterality: lat,
                    view,
                    age: None,
                    density: None,
                    diagnosis: crate::model::Diagnosis::Benign,
                    birads: None,
                    findings: Default::default(),
                    split: crate::model::Split::Unsplit,
                    raw_folder: "raw".into(),
                    processed_path: format!("{pid}/{lat}_{view}.png"),
                });
            }
        }
        out
    }

    #[test]
    fn exact_fraction_parsing() {
        let p: ExactFraction = "0.30".parse().unwrap();
        assert_eq!(p.floor_of(100), 30);
        let p: ExactFraction = "0.60".parse().unwrap();
        assert_eq!(p.floor_of(100), 60);
        // The value that goes wrong in binary floating point.
        let p: ExactFraction = "0.29".parse().unwrap();
        assert_eq!(p.floor_of(100), 29);
        let p: ExactFraction = "1".parse().unwrap();
        assert_eq!(p.floor_of(7), 7);
        assert!("1.5".parse::<ExactFraction>().is_err());
        assert!("-0.1".parse::<ExactFraction>().is_err());
        assert!("abc".parse::<ExactFraction>().is_err());
    }

    #[test]
    fn zero_fractions_empty_plan() {
        let records = records(5, &[(Laterality::L, ViewPosition::CC)]);
        let plan = plan_injection(&records, &ExactFraction::zero(), &ExactFraction::zero(), 1)
            .unwrap();
        assert!(plan.intensity_patients.is_empty());
        assert!(plan.laterality_images.is_empty());
    }

    #[test]
    fn exact_counts_for_paper_fractions() {
        let records = records(100, &[(Laterality::L, ViewPosition::CC), (Laterality::L, ViewPosition::MLO)]);
        for (fraction, expected) in [("0.30", 30usize), ("0.60", 60)] {
            let p: ExactFraction = fraction.parse().unwrap();
            let plan = plan_injection(&records, &p, &ExactFraction::zero(), 7).unwrap();
            assert_eq!(plan.intensity_patients.len(), expected, "{fraction}");
        }
        let q: ExactFraction = "0.25".parse().unwrap();
        let plan = plan_injection(&records, &ExactFraction::zero(), &q, 7).unwrap();
        assert_eq!(plan.laterality_images.len(), 50); // floor(0.25 * 200)
    }

    #[test]
    fn same_seed_same_plan_different_seed_differs() {
        let records = records(50, &[(Laterality::L, ViewPosition::CC)]);
        let p: ExactFraction = "0.5".parse().unwrap();
        let a = plan_injection(&records, &p, &p, 42).unwrap();
        let b = plan_injection(&records, &p, &p, 42).unwrap();
        assert_eq!(a, b);
        let c = plan_injection(&records, &p, &p, 43).unwrap();
        assert_ne!(a.intensity_patients, c.intensity_patients);
    }

    #[test]
    fn empty_store_is_an_error() {
        assert!(matches!(
            plan_injection(&[], &ExactFraction::zero(), &ExactFraction::zero(), 1),
            Err(InjectError::EmptyStore)
        ));
    }

    #[test]
    fn affected_lists_are_sorted_subsets() {
        let records = records(20, &[(Laterality::L, ViewPosition::CC)]);
        let p: ExactFraction = "0.4".parse().unwrap();
        let plan = plan_injection(&records, &p, &p, 99).unwrap();
        let mut sorted = plan.intensity_patients.clone();
        sorted.sort_unstable();
        assert_eq!(plan.intensity_patients, sorted);
        for img in &plan.laterality_images {
            assert!(records.iter().any(|r| &r.processed_path == img));
        }
    }

    #[test]
    fn floor_invariant_over_many_fractions() {
        let records = records(37, &[(Laterality::L, ViewPosition::CC)]);
        for num in 0..=20 {
            let raw = format!("0.{num:02}");
            let p: ExactFraction = raw.parse().unwrap();
            let plan = plan_injection(&records, &p, &ExactFraction::zero(), 5).unwrap();
            assert_eq!(
                plan.intensity_patients.len() as u64,
                p.floor_of(37),
                "{raw}"
            );
        }
    }
}
