//! Shared domain vocabulary: categories, records, exams and their validation.

mod category;
mod findings;
mod mapping;
mod record;

pub use category::{
    AsymmetryKind, BiRadsScore, Dataset, DensityCategory, Diagnosis, Laterality, Split,
    ViewPosition,
};
pub use findings::FindingSet;
pub use mapping::{map_density, map_pathology, MappingError};
pub use record::{validate_record, Exam, ImageKey, UnifiedRecord, Violation};

use thiserror::Error;

/// Failure to parse a category token.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid {category} value {value:?}")]
pub struct ParseCategoryError {
    pub category: &'static str,
    pub value: String,
}

impl ParseCategoryError {
    pub fn new(category: &'static str, value: &str) -> Self {
        Self {
            category,
            value: value.to_string(),
        }
    }
}
