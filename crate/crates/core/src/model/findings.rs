//! Abnormality flags and descriptors attached to a harmonized record.

use serde::{Deserialize, Serialize};

use crate::model::AsymmetryKind;

/// Presence flags plus optional descriptors for the four main abnormality
/// categories. Descriptor fields are only meaningful while the matching flag
/// is set; `validate` reports any descriptor-without-flag combination.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingSet {
    pub mass: bool,
    pub mass_shape: Option<String>,
    pub mass_margin: Option<String>,
    pub mass_density: Option<String>,
    pub calcification: bool,
    pub calc_morphology: Option<String>,
    pub calc_distribution: Option<String>,
    pub asymmetry: Option<AsymmetryKind>,
    pub architectural_distortion: bool,
    pub other_findings: Vec<String>,
}

impl FindingSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self == &Self::default()
    }

    /// Descriptor fields present without their presence flag, as
    /// `(field, rule)` pairs.
    pub fn descriptor_violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut out = Vec::new();
        if !self.mass {
            for (field, value) in [
                ("mass_shape", &self.mass_shape),
                ("mass_margin", &self.mass_margin),
                ("mass_density", &self.mass_density),
            ] {
                if value.is_some() {
                    out.push((field, "descriptor-without-flag"));
                }
            }
        }
        if !self.calcification {
            for (field, value) in [
                ("calc_morphology", &self.calc_morphology),
                ("calc_distribution", &self.calc_distribution),
            ] {
                if value.is_some() {
                    out.push((field, "descriptor-without-flag"));
                }
            }
        }
        out
    }

    /// Union of two finding sets for records describing the same image.
    /// Flags are OR-ed; descriptor texts are merged into a sorted,
    /// de-duplicated `;`-joined string so merge order cannot change output.
    pub fn merge(&self, other: &FindingSet) -> FindingSet {
        FindingSet {
            mass: self.mass || other.mass,
            mass_shape: merge_text(&self.mass_shape, &other.mass_shape),
            mass_margin: merge_text(&self.mass_margin, &other.mass_margin),
            mass_density: merge_text(&self.mass_density, &other.mass_density),
            calcification: self.calcification || other.calcification,
            calc_morphology: merge_text(&self.calc_morphology, &other.calc_morphology),
            calc_distribution: merge_text(&self.calc_distribution, &other.calc_distribution),
            asymmetry: self.asymmetry.max(other.asymmetry),
            architectural_distortion: self.architectural_distortion
                || other.architectural_distortion,
            other_findings: merge_lists(&self.other_findings, &other.other_findings),
        }
    }
}

fn merge_text(a: &Option<String>, b: &Option<String>) -> Option<String> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (Some(x), Some(y)) => {
            let mut parts: Vec<&str> = x.split(';').chain(y.split(';')).map(str::trim).collect();
            parts.sort_unstable();
            parts.dedup();
            Some(parts.join(";"))
        }
    }
}

fn merge_lists(a: &[String], b: &[String]) -> Vec<String> {
    let mut out: Vec<String> = a.iter().chain(b.iter()).cloned().collect();
    out.sort_unstable();
    out.dedup();
    out
}
