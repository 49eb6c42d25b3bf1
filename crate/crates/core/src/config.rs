//! Run configuration: a simple `key = value` file with `#` comments, plus
//! the effective-config fingerprint stamped into store manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::Dataset;
use crate::pipeline::{DetectorConfig, WindowWidth};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("config key {key:?}: {detail}")]
    Value { key: String, detail: String },
    #[error("{0}")]
    Invalid(String),
}

/// How table-level audits count: one row per image, or one per breast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Image,
    Breast,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Image => "image",
            Granularity::Breast => "breast",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_roots: BTreeMap<Dataset, PathBuf>,
    pub output_root: PathBuf,
    pub detector: DetectorConfig,
    pub workers: usize,
    /// false: records whose source image is missing stay in the metadata
    /// with a warning (dangling processed path); true: they are dropped
    /// before case selection.
    pub drop_missing_images: bool,
    /// Apply DICOM rescale slope/intercept before processing. Off by
    /// default: raw stored values.
    pub apply_rescale: bool,
    pub counting_granularity: Granularity,
    /// Per-adapter metadata file-name overrides (e.g. cbis_mass_train_csv).
    pub file_overrides: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_roots: BTreeMap::new(),
            output_root: PathBuf::from("unified_store"),
            detector: DetectorConfig::default(),
            workers: 1,
            drop_missing_images: false,
            apply_rescale: false,
            counting_granularity: Granularity::Breast,
            file_overrides: BTreeMap::new(),
        }
    }
}

const FILE_OVERRIDE_KEYS: [&str; 7] = [
    "cbis_mass_train_csv",
    "cbis_mass_test_csv",
    "cbis_calc_train_csv",
    "cbis_calc_test_csv",
    "tompei_metadata_csv",
    "vindr_breast_csv",
    "vindr_finding_csv",
];

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw_line.to_string(),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one `key = value` assignment; CLI flags reuse this to
    /// override file values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value_err = |detail: &str| ConfigError::Value {
            key: key.to_string(),
            detail: detail.to_string(),
        };
        match key {
            "cbis_root" => {
                self.dataset_roots.insert(Dataset::Cbis, value.into());
            }
            "tompei_root" => {
                self.dataset_roots.insert(Dataset::Tompei, value.into());
            }
            "vindr_root" => {
                self.dataset_roots.insert(Dataset::Vindr, value.into());
            }
            "store_root" => {
                self.dataset_roots.insert(Dataset::Store, value.into());
            }
            "output_root" => self.output_root = value.into(),
            "window_width" => {
                self.detector.window_width = if value.eq_ignore_ascii_case("auto") {
                    WindowWidth::Auto
                } else if let Ok(pixels) = value.parse::<u32>() {
                    if pixels == 0 {
                        return Err(value_err("window width must be at least 1 pixel"));
                    }
                    WindowWidth::Pixels(pixels)
                } else {
                    let fraction: f64 = value
                        .parse()
                        .map_err(|_| value_err("expected `auto`, a pixel count, or a fraction"))?;
                    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
                        return Err(value_err("fractions must be in (0, 1)"));
                    }
                    WindowWidth::Fraction(fraction)
                };
            }
            "sigma_tie_epsilon" => {
                let eps: f64 = value.parse().map_err(|_| value_err("expected a number"))?;
                if eps < 0.0 {
                    return Err(value_err("epsilon must be non-negative"));
                }
                self.detector.sigma_tie_epsilon = eps;
            }
            "background_threshold" => {
                let t: f64 = value.parse().map_err(|_| value_err("expected a number"))?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(value_err("threshold must be in (0, 1)"));
                }
                self.detector.background_threshold = t;
            }
            "workers" => {
                self.workers = value.parse().map_err(|_| value_err("expected an integer"))?;
            }
            "drop_missing_images" => self.drop_missing_images = parse_bool(value, value_err)?,
            "apply_rescale" => self.apply_rescale = parse_bool(value, value_err)?,
            "counting_granularity" => {
                self.counting_granularity = match value.to_ascii_lowercase().as_str() {
                    "image" => Granularity::Image,
                    "breast" => Granularity::Breast,
                    _ => return Err(value_err("expected `image` or `breast`")),
                };
            }
            key if FILE_OVERRIDE_KEYS.contains(&key) => {
                self.file_overrides.insert(key.to_string(), value.to_string());
            }
            _ => {
                return Err(ConfigError::Value {
                    key: key.to_string(),
                    detail: "unknown key".to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers < 1 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        for (dataset, root) in &self.dataset_roots {
            if root == &self.output_root {
                return Err(ConfigError::Invalid(format!(
                    "{dataset} root and output root must be distinct"
                )));
            }
        }
        Ok(())
    }

    /// Digest of the behavior-affecting configuration. Paths and worker
    /// count are excluded: they cannot change store contents.
    pub fn fingerprint(&self) -> String {
        let window = match self.detector.window_width {
            WindowWidth::Auto => "auto".to_string(),
            WindowWidth::Pixels(n) => format!("px:{n}"),
            WindowWidth::Fraction(f) => format!("frac:{f}"),
        };
        let canonical = format!(
            "schema={};window={};epsilon={};threshold={};drop_missing={};apply_rescale={};granularity={}",
            crate::store::SCHEMA_VERSION,
            window,
            self.detector.sigma_tie_epsilon,
            self.detector.background_threshold,
            self.drop_missing_images,
            self.apply_rescale,
            self.counting_granularity.as_str(),
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_bool(
    value: &str,
    err: impl Fn(&str) -> ConfigError,
) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(err("expected true or false")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# roots
cbis_root = /data/cbis
output_root = /data/out   # inline comment
window_width = 64
sigma_tie_epsilon = 0.5
background_threshold = 0.4
workers = 8
drop_missing_images = true
counting_granularity = image
cbis_mass_train_csv = custom.csv
";
        let cfg = RunConfig::from_str_contents(text).unwrap();
        assert_eq!(cfg.dataset_roots[&Dataset::Cbis], PathBuf::from("/data/cbis"));
        assert_eq!(cfg.detector.window_width, WindowWidth::Pixels(64));
        assert_eq!(cfg.detector.sigma_tie_epsilon, 0.5);
        assert_eq!(cfg.workers, 8);
        assert!(cfg.drop_missing_images);
        assert_eq!(cfg.counting_granularity, Granularity::Image);
        assert_eq!(cfg.file_overrides["cbis_mass_train_csv"], "custom.csv");
    }

    #[test]
    fn fraction_window_width() {
        let cfg = RunConfig::from_str_contents("window_width = 0.05\n").unwrap();
        assert_eq!(cfg.detector.window_width, WindowWidth::Fraction(0.05));
        let cfg = RunConfig::from_str_contents("window_width = auto\n").unwrap();
        assert_eq!(cfg.detector.window_width, WindowWidth::Auto);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_str_contents("workers = 0\n").is_err());
        assert!(RunConfig::from_str_contents("background_threshold = 1.5\n").is_err());
        assert!(RunConfig::from_str_contents("no_such_key = 1\n").is_err());
        assert!(RunConfig::from_str_contents("just a line\n").is_err());
    }

    #[test]
    fn output_must_differ_from_roots() {
        let text = "cbis_root = /data/x\noutput_root = /data/x\n";
        assert!(RunConfig::from_str_contents(text).is_err());
    }

    #[test]
    fn fingerprint_tracks_behavior_not_paths() {
        let a = RunConfig::from_str_contents("cbis_root = /a\noutput_root = /b\n").unwrap();
        let b = RunConfig::from_str_contents("cbis_root = /c\noutput_root = /d\nworkers = 16\n")
            .unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = RunConfig::from_str_contents("background_threshold = 0.6\n").unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 12);
    }
}
