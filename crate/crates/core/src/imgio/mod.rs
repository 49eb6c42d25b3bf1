//! Image decode/encode: isolates all binary-format parsing.
//!
//! Supported inputs are 8/16-bit grayscale PNG and the DICOM subset decoded
//! by [`dicom`]. Output is always 16-bit grayscale PNG. Format detection is
//! content-based, not extension-based.

mod buffer;
mod dicom;
mod pngio;

pub use buffer::{BitDepth, ImageBuffer};
pub use dicom::looks_like_dicom;

use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported color layout in {path}: {detail} (only grayscale is handled)")]
    UnsupportedColor { path: PathBuf, detail: String },
    #[error("unsupported transfer syntax in {path}: {uid} (pre-convert compressed DICOM to explicit little-endian first)")]
    UnsupportedTransferSyntax { path: PathBuf, uid: String },
    #[error("unsupported bit depth {bits} in {path}")]
    UnsupportedBitDepth { path: PathBuf, bits: u16 },
    #[error("unsupported pixel format in {path}: {detail}")]
    UnsupportedPixelFormat { path: PathBuf, detail: String },
    #[error("truncated image file {path}")]
    Truncated { path: PathBuf },
    #[error("malformed image file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("unrecognized image format in {path} (expected PNG or DICOM)")]
    UnknownFormat { path: PathBuf },
    #[error("writer only accepts 16-bit buffers; run dynamic-range normalization first")]
    NormalizeFirst,
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("sample count mismatch: expected {expected}, got {actual}")]
    SampleCountMismatch { expected: usize, actual: usize },
    #[error("sample {sample} exceeds {bits}-bit range")]
    SampleOutOfRange { sample: u16, bits: u16 },
}

/// DICOM photometric interpretation for monochrome data. `Monochrome1`
/// means minimum-is-white; the decoder records it and leaves samples alone
/// so the statistical polarity detector can be checked against header truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photometric {
    Monochrome1,
    Monochrome2,
}

/// Container-level facts about a decoded source image.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceImageMeta {
    pub photometric: Option<Photometric>,
    /// Meaningful sample width as declared by the container (BitsStored for
    /// DICOM, the PNG bit depth otherwise).
    pub stored_bits: u16,
    pub path: PathBuf,
    /// DICOM rescale (slope, intercept) when present; applied only on
    /// request, raw stored values are the default.
    pub rescale: Option<(f64, f64)>,
}

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Decodes a PNG or DICOM file, sniffing the container from its leading
/// bytes.
pub fn read_image(path: &Path) -> Result<(ImageBuffer, SourceImageMeta), ImageIoError> {
    let mut head = [0u8; 140];
    let n = {
        let mut file = std::fs::File::open(path).map_err(|source| ImageIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        read_up_to(&mut file, &mut head).map_err(|source| ImageIoError::Io {
            path: path.to_path_buf(),
            source,
        })?
    };
    let head = &head[..n];

    if head.starts_with(&PNG_MAGIC) {
        pngio::read_png(path)
    } else if looks_like_dicom(head) {
        dicom::read_dicom(path)
    } else {
        Err(ImageIoError::UnknownFormat {
            path: path.to_path_buf(),
        })
    }
}

/// Writes a 16-bit grayscale PNG, non-interlaced. Read-after-write
/// reproduces the samples exactly.
pub fn write_image(buffer: &ImageBuffer, path: &Path) -> Result<(), ImageIoError> {
    pngio::write_png(buffer, path)
}

/// Applies a DICOM rescale transform in floating point, clamping back into
/// the container range. Identity transforms return the input untouched.
pub fn apply_rescale(buffer: ImageBuffer, slope: f64, intercept: f64) -> ImageBuffer {
    if slope == 1.0 && intercept == 0.0 {
        return buffer;
    }
    let max = buffer.max_value() as f64;
    let (w, h, depth) = (buffer.width(), buffer.height(), buffer.bit_depth());
    let samples = buffer
        .into_samples()
        .into_iter()
        .map(|v| {
            let mapped = (v as f64 * slope + intercept).round().clamp(0.0, max);
            mapped as u16
        })
        .collect();
    ImageBuffer::from_parts_unchecked(w, h, depth, samples)
}

fn read_up_to(reader: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}
