//! Deterministic synthetic mammography-like frames.
//!
//! Canonical frames carry random texture spanning the full sample range on
//! the left half and a uniform zero background on the right half, which is
//! exactly the regime where the laterality and polarity detectors are
//! well-posed: the edge windows are pure texture on one side and pure
//! background on the other, and min-max normalization degenerates to an
//! exact integer scaling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgio::{BitDepth, ImageBuffer};

/// Distinct frame shapes spanning the resolution spread seen in practice
/// (heights 2812-3580, widths 2012-2812).
pub fn resolution_table() -> Vec<(u32, u32)> {
    (0..58u32)
        .map(|i| {
            let h = 2812 + (i * 13) % 769;
            let w = 2012 + (i * 29) % 801;
            (w, h)
        })
        .collect()
}

/// Builds a canonical frame: textured left half in `[1, max]` with at least
/// one full-scale sample, zero right half. Identical seeds yield identical
/// frames.
pub fn canonical_frame(width: u32, height: u32, depth: BitDepth, seed: u64) -> ImageBuffer {
    assert!(width >= 4, "canonical frames need a real left/right split");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = depth.max_value() as u64;
    let tissue_cols = (width / 2) as usize;

    let mut samples = vec![0u16; width as usize * height as usize];
    for y in 0..height as usize {
        let row = &mut samples[y * width as usize..(y + 1) * width as usize];
        for v in row[..tissue_cols].iter_mut() {
            *v = (1 + rng.next_u64() % max) as u16;
        }
    }
    // Pin one full-scale sample so the normalization scale factor is exact.
    samples[0] = depth.max_value();

    ImageBuffer::from_parts_unchecked(width, height, depth, samples)
}

/// A small deterministic frame for unit tests.
pub fn small_canonical(seed: u64) -> ImageBuffer {
    canonical_frame(32, 24, BitDepth::Eight, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{detect_laterality, DetectorConfig};
    use crate::model::Laterality;

    #[test]
    fn resolutions_are_distinct_and_in_band() {
        let table = resolution_table();
        assert_eq!(table.len(), 58);
        let mut dedup = table.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 58);
        for (w, h) in table {
            assert!((2012..=2812).contains(&w));
            assert!((2812..=3580).contains(&h));
        }
    }

    #[test]
    fn frames_are_deterministic_and_canonical() {
        let a = canonical_frame(64, 48, BitDepth::Sixteen, 7);
        let b = canonical_frame(64, 48, BitDepth::Sixteen, 7);
        assert_eq!(a, b);
        assert_eq!(a.min_max(), (0, u16::MAX));
        let det = detect_laterality(&a, &DetectorConfig::default());
        assert_eq!(det.side, Laterality::L);
        assert!(!det.tie);
    }
}
