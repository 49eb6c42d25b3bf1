//! Shared category vocabulary: density, assessment, diagnosis, laterality,
//! view, split and dataset identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ParseCategoryError;

/// Four-level breast density scale, ordered A (almost entirely fatty)
/// through D (extremely dense).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DensityCategory {
    A,
    B,
    C,
    D,
}

impl DensityCategory {
    pub const ALL: [DensityCategory; 4] = [
        DensityCategory::A,
        DensityCategory::B,
        DensityCategory::C,
        DensityCategory::D,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DensityCategory::A => "A",
            DensityCategory::B => "B",
            DensityCategory::C => "C",
            DensityCategory::D => "D",
        }
    }
}

impl fmt::Display for DensityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityCategory {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(DensityCategory::A),
            "B" | "b" => Ok(DensityCategory::B),
            "C" | "c" => Ok(DensityCategory::C),
            "D" | "d" => Ok(DensityCategory::D),
            other => Err(ParseCategoryError::new("density", other)),
        }
    }
}

/// Radiological assessment score. Scores 0-6 parse; harmonized records are
/// restricted to 1-5 by case selection (0 is excluded, 6 does not occur in
/// the supported datasets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiRadsScore(u8);

impl BiRadsScore {
    pub fn new(value: u8) -> Result<Self, ParseCategoryError> {
        if value <= 6 {
            Ok(BiRadsScore(value))
        } else {
            Err(ParseCategoryError::new("birads", &value.to_string()))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// True for the 1-5 range harmonized records may carry.
    pub fn is_harmonized(self) -> bool {
        (1..=5).contains(&self.0)
    }
}

impl fmt::Display for BiRadsScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for BiRadsScore {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        trimmed
            .parse::<u8>()
            .map_err(|_| ParseCategoryError::new("birads", trimmed))
            .and_then(BiRadsScore::new)
    }
}

/// Biopsy-level diagnostic label. `Unknown` is reserved for datasets that do
/// not ship biopsy results (VinDr-Mammo).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    Normal,
    Benign,
    Malignant,
    Unknown,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 4] = [
        Diagnosis::Normal,
        Diagnosis::Benign,
        Diagnosis::Malignant,
        Diagnosis::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::Normal => "Normal",
            Diagnosis::Benign => "Benign",
            Diagnosis::Malignant => "Malignant",
            Diagnosis::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Diagnosis {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Diagnosis::Normal),
            "benign" => Ok(Diagnosis::Benign),
            "malignant" => Ok(Diagnosis::Malignant),
            "unknown" => Ok(Diagnosis::Unknown),
            other => Err(ParseCategoryError::new("diagnosis", other)),
        }
    }
}

/// Breast side depicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Laterality {
    L,
    R,
}

impl Laterality {
    pub fn as_str(self) -> &'static str {
        match self {
            Laterality::L => "L",
            Laterality::R => "R",
        }
    }

    pub fn opposite(self) -> Laterality {
        match self {
            Laterality::L => Laterality::R,
            Laterality::R => Laterality::L,
        }
    }
}

impl fmt::Display for Laterality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Laterality {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" | "LEFT" => Ok(Laterality::L),
            "R" | "RIGHT" => Ok(Laterality::R),
            other => Err(ParseCategoryError::new("laterality", other)),
        }
    }
}

/// Standard mammographic projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewPosition {
    CC,
    MLO,
}

impl ViewPosition {
    pub const ALL: [ViewPosition; 2] = [ViewPosition::CC, ViewPosition::MLO];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewPosition::CC => "CC",
            ViewPosition::MLO => "MLO",
        }
    }
}

impl fmt::Display for ViewPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewPosition {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CC" => Ok(ViewPosition::CC),
            "MLO" => Ok(ViewPosition::MLO),
            other => Err(ParseCategoryError::new("view", other)),
        }
    }
}

/// Dataset partition carried by a record. `Unsplit` marks datasets whose
/// predefined partition was discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unsplit,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unsplit" => Ok(Split::Unsplit),
            other => Err(ParseCategoryError::new("split", other)),
        }
    }
}

/// Source dataset identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Cbis,
    Tompei,
    Vindr,
    /// A previously written unified store re-ingested as a source, used to
    /// re-run the image pipeline over corrupted copies.
    Store,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Cbis => "cbis",
            Dataset::Tompei => "tompei",
            Dataset::Vindr => "vindr",
            Dataset::Store => "store",
        }
    }

    /// Datasets whose records must carry a retained train/test split.
    pub fn retains_split(self) -> bool {
        matches!(self, Dataset::Vindr)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cbis" | "cbis-ddsm" => Ok(Dataset::Cbis),
            "tompei" | "tompei-cmmd" => Ok(Dataset::Tompei),
            "vindr" | "vindr-mammo" => Ok(Dataset::Vindr),
            "store" => Ok(Dataset::Store),
            other => Err(ParseCategoryError::new("dataset", other)),
        }
    }
}

/// Asymmetry subtype as annotated by the source datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AsymmetryKind {
    Asymmetry,
    Focal,
    Global,
}

impl AsymmetryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AsymmetryKind::Asymmetry => "Asymmetry",
            AsymmetryKind::Focal => "Focal Asymmetry",
            AsymmetryKind::Global => "Global Asymmetry",
        }
    }
}

impl fmt::Display for AsymmetryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AsymmetryKind {
    type Err = ParseCategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asymmetry" => Ok(AsymmetryKind::Asymmetry),
            "focal" | "focal asymmetry" => Ok(AsymmetryKind::Focal),
            "global" | "global asymmetry" => Ok(AsymmetryKind::Global),
            other => Err(ParseCategoryError::new("asymmetry", other)),
        }
    }
}
