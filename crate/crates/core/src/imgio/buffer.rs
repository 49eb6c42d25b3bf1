//! Row-major grayscale sample buffer shared by the whole pipeline.

use crate::imgio::ImageIoError;

/// Container sample width of a decoded image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u16 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    /// Largest representable sample value.
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }
}

/// Width x height grayscale image with row-major samples, each strictly
/// below `2^bit_depth`. Samples are held as `u16` regardless of depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    bit_depth: BitDepth,
    samples: Vec<u16>,
}

impl ImageBuffer {
    /// Builds a buffer, enforcing the shape and range invariants.
    pub fn new(
        width: u32,
        height: u32,
        bit_depth: BitDepth,
        samples: Vec<u16>,
    ) -> Result<Self, ImageIoError> {
        if width < 2 || height < 1 {
            return Err(ImageIoError::InvalidDimensions { width, height });
        }
        let expected = width as usize * height as usize;
        if samples.len() != expected {
            return Err(ImageIoError::SampleCountMismatch {
                expected,
                actual: samples.len(),
            });
        }
        let max = bit_depth.max_value();
        if bit_depth != BitDepth::Sixteen {
            if let Some(&bad) = samples.iter().find(|&&s| s > max) {
                return Err(ImageIoError::SampleOutOfRange {
                    sample: bad,
                    bits: bit_depth.bits(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            samples,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    /// Full-scale value for this buffer's depth.
    pub fn max_value(&self) -> u16 {
        self.bit_depth.max_value()
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u16> {
        self.samples
    }

    pub fn sample(&self, x: u32, y: u32) -> u16 {
        debug_assert!(x < self.width && y < self.height);
        self.samples[y as usize * self.width as usize + x as usize]
    }

    pub fn row(&self, y: u32) -> &[u16] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.samples[start..start + w]
    }

    /// Minimum and maximum sample value.
    pub fn min_max(&self) -> (u16, u16) {
        let mut min = u16::MAX;
        let mut max = 0u16;
        for &s in &self.samples {
            min = min.min(s);
            max = max.max(s);
        }
        (min, max)
    }

    /// Internal constructor for transforms that preserve the invariants.
    pub(crate) fn from_parts_unchecked(
        width: u32,
        height: u32,
        bit_depth: BitDepth,
        samples: Vec<u16>,
    ) -> Self {
        debug_assert_eq!(samples.len(), width as usize * height as usize);
        Self {
            width,
            height,
            bit_depth,
            samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageBuffer::new(1, 4, BitDepth::Eight, vec![0; 4]).is_err());
        assert!(ImageBuffer::new(4, 0, BitDepth::Eight, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, BitDepth::Eight, vec![0; 3]).is_err());
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(ImageBuffer::new(2, 1, BitDepth::Eight, vec![0, 256]).is_err());
        assert!(ImageBuffer::new(2, 1, BitDepth::Eight, vec![0, 255]).is_ok());
        assert!(ImageBuffer::new(2, 1, BitDepth::Sixteen, vec![0, u16::MAX]).is_ok());
    }

    #[test]
    fn row_and_sample_access() {
        let img = ImageBuffer::new(3, 2, BitDepth::Eight, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(img.row(1), &[4, 5, 6]);
        assert_eq!(img.sample(2, 0), 3);
        assert_eq!(img.min_max(), (1, 6));
    }
}
