//! Per-image corrections: dynamic-range normalization, laterality detection
//! and correction, and intensity-polarity detection and correction.
//!
//! The store convention is breast tissue on the left edge over a dark
//! background. Laterality is decided by comparing the population standard
//! deviation of a thin window on each lateral edge: the tissue side carries
//! texture, the background side is flat. The same window on the background
//! side drives polarity detection: a bright background median means the
//! intensities are flipped.
//!
//! All statistics are computed with exact integer accumulators, so results
//! are independent of traversal order and bit-identical across runs.

use serde::Serialize;
use thiserror::Error;

use crate::imgio::{BitDepth, ImageBuffer, Photometric, SourceImageMeta};
use crate::model::{ImageKey, Laterality};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("window width {n} out of range for image width {width}")]
    WindowOutOfRange { n: u32, width: u32 },
}

/// Lateral edge selector for windowed statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSide {
    Left,
    Right,
}

/// Width of the lateral detection window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowWidth {
    /// max(16 px, 2% of image width); thin enough to avoid sampling tissue
    /// on the background side, wide enough to survive edge artifacts.
    Auto,
    Pixels(u32),
    Fraction(f64),
}

impl Default for WindowWidth {
    fn default() -> Self {
        WindowWidth::Auto
    }
}

/// Detector tuning. Loaded from the run config; defaults match the values
/// documented there.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub window_width: WindowWidth,
    /// Band (in sample-intensity units) within which the two window sigmas
    /// count as a tie.
    pub sigma_tie_epsilon: f64,
    /// Fraction of full range the background median must exceed to count as
    /// intensity-flipped.
    pub background_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_width: WindowWidth::Auto,
            sigma_tie_epsilon: 1e-6,
            background_threshold: 0.5,
        }
    }
}

impl DetectorConfig {
    /// Resolves the configured window width against an image width,
    /// clamping into the valid `1 <= n < W/2` band.
    pub fn resolve_window(&self, width: u32) -> u32 {
        let computed = match self.window_width {
            WindowWidth::Auto => ((width as f64) * 0.02).round().max(16.0) as u32,
            WindowWidth::Pixels(n) => n,
            WindowWidth::Fraction(f) => ((width as f64) * f).round().max(1.0) as u32,
        };
        let upper = ((width.saturating_sub(1)) / 2).max(1);
        computed.clamp(1, upper)
    }
}

/// Population standard deviation of the samples in the `n` leftmost or
/// rightmost columns, exact-integer accumulation.
pub fn window_sigma(
    image: &ImageBuffer,
    side: WindowSide,
    n: u32,
) -> Result<f64, PipelineError> {
    let w = image.width();
    if n < 1 || n > w {
        return Err(PipelineError::WindowOutOfRange { n, width: w });
    }
    let (start, end) = match side {
        WindowSide::Left => (0, n as usize),
        WindowSide::Right => ((w - n) as usize, w as usize),
    };

    let mut sum: u128 = 0;
    let mut sum_sq: u128 = 0;
    for y in 0..image.height() {
        for &v in &image.row(y)[start..end] {
            sum += v as u128;
            sum_sq += (v as u128) * (v as u128);
        }
    }
    let count = (n as u128) * (image.height() as u128);
    // population variance = (N * sum_sq - sum^2) / N^2, numerator exact
    let numerator = count * sum_sq - sum * sum;
    Ok((numerator as f64).sqrt() / count as f64)
}

/// Outcome of the window-sigma laterality rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralityDetection {
    pub side: Laterality,
    /// |sigma_L - sigma_R| / max(sigma_L, sigma_R, 1); 0 on ties.
    pub confidence: f64,
    /// Sigmas within the epsilon band: the rule's fallback branch applied.
    pub tie: bool,
}

/// Decides laterality: left when the left window sigma exceeds the right by
/// more than epsilon, otherwise right. Ties resolve to right with zero
/// confidence and an explicit flag so they stay auditable.
pub fn detect_laterality(image: &ImageBuffer, cfg: &DetectorConfig) -> LateralityDetection {
    let n = cfg.resolve_window(image.width());
    let sigma_left = window_sigma(image, WindowSide::Left, n).expect("resolved window in range");
    let sigma_right = window_sigma(image, WindowSide::Right, n).expect("resolved window in range");

    let diff = sigma_left - sigma_right;
    if diff.abs() <= cfg.sigma_tie_epsilon {
        return LateralityDetection {
            side: Laterality::R,
            confidence: 0.0,
            tie: true,
        };
    }
    let confidence = diff.abs() / sigma_left.max(sigma_right).max(1.0);
    LateralityDetection {
        side: if diff > 0.0 { Laterality::L } else { Laterality::R },
        confidence,
        tie: false,
    }
}

/// Horizontal mirror; self-inverse.
pub fn mirror_horizontal(image: &ImageBuffer) -> ImageBuffer {
    let (w, h, depth) = (image.width(), image.height(), image.bit_depth());
    let mut samples = Vec::with_capacity(image.samples().len());
    for y in 0..h {
        samples.extend(image.row(y).iter().rev().copied());
    }
    ImageBuffer::from_parts_unchecked(w, h, depth, samples)
}

/// Intensity complement `v -> max - v`; self-inverse.
pub fn invert_intensity(image: &ImageBuffer) -> ImageBuffer {
    let max = image.max_value();
    let (w, h, depth) = (image.width(), image.height(), image.bit_depth());
    let samples = image.samples().iter().map(|&v| max - v).collect();
    ImageBuffer::from_parts_unchecked(w, h, depth, samples)
}

/// Orientation step outcome recorded into the QC report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientationQc {
    pub declared: Laterality,
    pub detected: Laterality,
    pub tie: bool,
    pub confidence: f64,
    /// The image was mirrored to reach the tissue-left convention.
    pub mirrored: bool,
    /// Confident detection contradicted the declared laterality: the
    /// "flipped laterality" defect.
    pub declaration_contradicted: bool,
}

/// Rotates the image into the tissue-left store convention based on the
/// detected (not declared) side. Ties pass through unmirrored.
pub fn standardize_orientation(
    image: ImageBuffer,
    declared: Laterality,
    cfg: &DetectorConfig,
) -> (ImageBuffer, OrientationQc) {
    let detection = detect_laterality(&image, cfg);
    let mirrored = detection.side == Laterality::R && !detection.tie;
    let out = if mirrored {
        mirror_horizontal(&image)
    } else {
        image
    };
    let qc = OrientationQc {
        declared,
        detected: detection.side,
        tie: detection.tie,
        confidence: detection.confidence,
        mirrored,
        declaration_contradicted: !detection.tie && detection.side != declared,
    };
    (out, qc)
}

/// Polarity-check outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipDetection {
    pub flipped: bool,
    pub confidence: f64,
}

/// Checks the background-side (right-edge) window of a canonically oriented
/// image: a median above `background_threshold` of full range means the
/// polarity is flipped. The median is robust to burned-in markers; the mean
/// is not.
pub fn detect_intensity_flip(image: &ImageBuffer, cfg: &DetectorConfig) -> FlipDetection {
    let n = cfg.resolve_window(image.width());
    let start = (image.width() - n) as usize;
    let mut window = Vec::with_capacity(n as usize * image.height() as usize);
    for y in 0..image.height() {
        window.extend_from_slice(&image.row(y)[start..]);
    }
    window.sort_unstable();
    let median = if window.len() % 2 == 1 {
        window[window.len() / 2] as f64
    } else {
        (window[window.len() / 2 - 1] as f64 + window[window.len() / 2] as f64) / 2.0
    };

    let full = image.max_value() as f64;
    let threshold = cfg.background_threshold;
    let flipped = median > threshold * full;
    let confidence =
        ((median / full - threshold).abs() / threshold.max(1.0 - threshold)).min(1.0);
    FlipDetection { flipped, confidence }
}

/// Min-max rescale parameters recorded per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NormalizationParams {
    pub min_in: u16,
    pub max_in: u16,
    pub target_bits: u8,
}

/// Linear per-image min-max rescale onto the full 16-bit range, rounding
/// half-up in exact integer arithmetic. Constant images map to all-zero
/// (division guard; a constant mammogram is invalid anyway and gets a QC
/// warning upstream).
pub fn normalize_dynamic_range(image: &ImageBuffer) -> (ImageBuffer, NormalizationParams) {
    const TARGET_BITS: u8 = 16;
    let target_max = u16::MAX as u64;
    let (min_in, max_in) = image.min_max();
    let (w, h) = (image.width(), image.height());

    let samples: Vec<u16> = if min_in == max_in {
        vec![0; image.samples().len()]
    } else {
        let range = (max_in - min_in) as u64;
        image
            .samples()
            .iter()
            .map(|&v| {
                let scaled = (v - min_in) as u64 * target_max;
                ((2 * scaled + range) / (2 * range)) as u16
            })
            .collect()
    };
    let out = ImageBuffer::from_parts_unchecked(w, h, BitDepth::Sixteen, samples);
    (
        out,
        NormalizationParams {
            min_in,
            max_in,
            target_bits: TARGET_BITS,
        },
    )
}

/// Full per-image QC record: what was detected and what was applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QcReport {
    pub key: ImageKey,
    pub declared_laterality: Laterality,
    pub detected_laterality: Laterality,
    pub laterality_tie: bool,
    pub laterality_confidence: f64,
    /// Confident detection contradicted the declared side.
    pub laterality_flipped: bool,
    pub mirrored: bool,
    pub intensity_inverted: bool,
    pub intensity_confidence: f64,
    /// Container sample width of the source (8 or 16).
    pub source_bit_depth: u16,
    /// Declared meaningful bits of the source container.
    pub source_stored_bits: u16,
    pub normalization: NormalizationParams,
    pub warnings: Vec<String>,
}

/// Runs the full correction chain in its fixed order: normalize, then
/// orientation, then polarity. Polarity detection requires known
/// orientation; normalization is orientation-agnostic so it runs first.
///
/// A MONOCHROME1 header is ground truth for polarity: the image is inverted
/// regardless of the detector, and a disagreement is logged as a warning.
pub fn process_image(
    key: ImageKey,
    image: ImageBuffer,
    declared: Laterality,
    meta: &SourceImageMeta,
    cfg: &DetectorConfig,
) -> (ImageBuffer, QcReport) {
    let source_bit_depth = image.bit_depth().bits();
    let mut warnings = Vec::new();

    let (normalized, normalization) = normalize_dynamic_range(&image);
    if normalization.min_in == normalization.max_in {
        warnings.push("constant-image".to_string());
    }

    let (oriented, orient) = standardize_orientation(normalized, declared, cfg);
    if orient.tie {
        warnings.push("laterality-tie".to_string());
    }

    let flip = detect_intensity_flip(&oriented, cfg);
    let invert = match meta.photometric {
        Some(Photometric::Monochrome1) => {
            if !flip.flipped {
                warnings.push("monochrome1-header-overrides-detector".to_string());
            }
            true
        }
        _ => flip.flipped,
    };
    let output = if invert {
        invert_intensity(&oriented)
    } else {
        oriented
    };

    let qc = QcReport {
        key,
        declared_laterality: declared,
        detected_laterality: orient.detected,
        laterality_tie: orient.tie,
        laterality_confidence: orient.confidence,
        laterality_flipped: orient.declaration_contradicted,
        mirrored: orient.mirrored,
        intensity_inverted: invert,
        intensity_confidence: flip.confidence,
        source_bit_depth,
        source_stored_bits: meta.stored_bits,
        normalization,
        warnings,
    };
    (output, qc)
}
