//! Per-dataset vocabulary mapping: density codes and pathology labels.
//!
//! The three sources encode breast density differently: CBIS-DDSM as numeric
//! codes 1-4, TOMPEI-CMMD as textual descriptions, VinDr-Mammo as
//! `DENSITY A`..`DENSITY D` labels. Each table below is frozen; values
//! outside it map to `None` and are surfaced as adapter warnings instead of
//! being guessed at.

use thiserror::Error;

use crate::model::{Dataset, DensityCategory, Diagnosis};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("unrecognized pathology label {raw:?} for {dataset}")]
    UnknownPathology { dataset: Dataset, raw: String },
}

/// Maps a raw density value onto the A-D scale. Unmappable values yield
/// `None`; the caller records them as warnings.
pub fn map_density(raw: &str, dataset: Dataset) -> Option<DensityCategory> {
    let norm = normalize(raw);
    if norm.is_empty() {
        return None;
    }
    match dataset {
        Dataset::Cbis => match strip_float_suffix(&norm) {
            "1" => Some(DensityCategory::A),
            "2" => Some(DensityCategory::B),
            "3" => Some(DensityCategory::C),
            "4" => Some(DensityCategory::D),
            _ => None,
        },
        Dataset::Tompei => match norm.as_str() {
            "almost entirely fatty" | "a" => Some(DensityCategory::A),
            "scattered areas of fibroglandular density"
            | "scattered fibroglandular density"
            | "scattered fibroglandular densities"
            | "b" => Some(DensityCategory::B),
            "heterogeneously dense" | "c" => Some(DensityCategory::C),
            "extremely dense" | "d" => Some(DensityCategory::D),
            _ => None,
        },
        Dataset::Vindr => match norm.as_str() {
            "density a" | "a" => Some(DensityCategory::A),
            "density b" | "b" => Some(DensityCategory::B),
            "density c" | "c" => Some(DensityCategory::C),
            "density d" | "d" => Some(DensityCategory::D),
            _ => None,
        },
        // Stores persist the harmonized single-letter categories.
        Dataset::Store => match norm.as_str() {
            "a" => Some(DensityCategory::A),
            "b" => Some(DensityCategory::B),
            "c" => Some(DensityCategory::C),
            "d" => Some(DensityCategory::D),
            _ => None,
        },
    }
}

/// Maps a raw pathology label onto the harmonized diagnosis vocabulary.
/// Unrecognized labels are an error; the offending row is quarantined by the
/// adapter rather than silently coerced.
pub fn map_pathology(raw: &str, dataset: Dataset) -> Result<Diagnosis, MappingError> {
    let norm = normalize(raw);
    match dataset {
        Dataset::Cbis => match norm.as_str() {
            "malignant" => Ok(Diagnosis::Malignant),
            // Table-level outputs only distinguish benign vs malignant, so
            // the callback distinction collapses; biopsy semantics survive.
            "benign" | "benign_without_callback" | "benign without callback" => {
                Ok(Diagnosis::Benign)
            }
            _ => Err(MappingError::UnknownPathology {
                dataset,
                raw: raw.to_string(),
            }),
        },
        Dataset::Tompei => match norm.as_str() {
            "normal" => Ok(Diagnosis::Normal),
            "benign" => Ok(Diagnosis::Benign),
            "malignant" => Ok(Diagnosis::Malignant),
            _ => Err(MappingError::UnknownPathology {
                dataset,
                raw: raw.to_string(),
            }),
        },
        // VinDr ships no biopsy labels; assessments are deliberately not
        // used as a stand-in since assessment and biopsy can disagree.
        Dataset::Vindr => Ok(Diagnosis::Unknown),
        Dataset::Store => match norm.as_str() {
            "normal" => Ok(Diagnosis::Normal),
            "benign" => Ok(Diagnosis::Benign),
            "malignant" => Ok(Diagnosis::Malignant),
            "unknown" => Ok(Diagnosis::Unknown),
            _ => Err(MappingError::UnknownPathology {
                dataset,
                raw: raw.to_string(),
            }),
        },
    }
}

fn normalize(raw: &str) -> String {
    raw.trim().to_ascii_lowercase()
}

/// CSV round-trips through spreadsheet tools turn `3` into `3.0`.
fn strip_float_suffix(s: &str) -> &str {
    s.strip_suffix(".0").unwrap_or(s)
}
