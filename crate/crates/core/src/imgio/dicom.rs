//! Minimal DICOM decoder for uncompressed little-endian monochrome images.
//!
//! Covers exactly what the supported datasets distribute: Part-10 files with
//! explicit or implicit VR little-endian transfer syntax, single-frame,
//! single-sample grayscale pixel data at 8 or 16 bits allocated. Compressed
//! syntaxes, big-endian files, color images and signed pixel data are
//! rejected with distinct error categories; they require external
//! pre-conversion.

use std::path::Path;

use crate::imgio::{BitDepth, ImageBuffer, ImageIoError, Photometric, SourceImageMeta};

const IMPLICIT_VR_LE: &str = "1.2.840.10008.1.2";
const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

const TAG_SAMPLES_PER_PIXEL: (u16, u16) = (0x0028, 0x0002);
const TAG_PHOTOMETRIC: (u16, u16) = (0x0028, 0x0004);
const TAG_NUMBER_OF_FRAMES: (u16, u16) = (0x0028, 0x0008);
const TAG_ROWS: (u16, u16) = (0x0028, 0x0010);
const TAG_COLUMNS: (u16, u16) = (0x0028, 0x0011);
const TAG_BITS_ALLOCATED: (u16, u16) = (0x0028, 0x0100);
const TAG_BITS_STORED: (u16, u16) = (0x0028, 0x0101);
const TAG_PIXEL_REPRESENTATION: (u16, u16) = (0x0028, 0x0103);
const TAG_RESCALE_INTERCEPT: (u16, u16) = (0x0028, 0x1052);
const TAG_RESCALE_SLOPE: (u16, u16) = (0x0028, 0x1053);
const TAG_PIXEL_DATA: (u16, u16) = (0x7FE0, 0x0010);
const TAG_ITEM: (u16, u16) = (0xFFFE, 0xE000);
const TAG_ITEM_DELIM: (u16, u16) = (0xFFFE, 0xE00D);
const TAG_SEQ_DELIM: (u16, u16) = (0xFFFE, 0xE0DD);

const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;

pub fn read_dicom(path: &Path) -> Result<(ImageBuffer, SourceImageMeta), ImageIoError> {
    let data = std::fs::read(path).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&data, path)
}

/// True when the byte stream carries the Part-10 "DICM" magic.
pub fn looks_like_dicom(data: &[u8]) -> bool {
    data.len() > 132 && &data[128..132] == b"DICM"
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn truncated(&self) -> ImageIoError {
        ImageIoError::Truncated {
            path: self.path.to_path_buf(),
        }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageIoError> {
        if self.remaining() < n {
            return Err(self.truncated());
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn skip(&mut self, n: usize) -> Result<(), ImageIoError> {
        if self.remaining() < n {
            return Err(self.truncated());
        }
        self.pos += n;
        Ok(())
    }

    fn read_u16(&mut self) -> Result<u16, ImageIoError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn read_u32(&mut self) -> Result<u32, ImageIoError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn read_tag(&mut self) -> Result<(u16, u16), ImageIoError> {
        let group = self.read_u16()?;
        let element = self.read_u16()?;
        Ok((group, element))
    }

    fn peek_group(&self) -> Option<u16> {
        if self.remaining() < 2 {
            return None;
        }
        Some(u16::from_le_bytes([self.data[self.pos], self.data[self.pos + 1]]))
    }
}

/// One data element as raw bytes (empty for skipped sequences).
struct Element<'a> {
    tag: (u16, u16),
    value: &'a [u8],
}

/// VRs that use the 4-byte length form in explicit VR encoding.
fn long_form_vr(vr: &[u8]) -> bool {
    matches!(vr, b"OB" | b"OW" | b"OF" | b"OL" | b"OD" | b"SQ" | b"UC" | b"UR" | b"UT" | b"UN")
}

fn read_element<'a>(
    cur: &mut Cursor<'a>,
    explicit: bool,
) -> Result<Element<'a>, ImageIoError> {
    let tag = cur.read_tag()?;

    if tag == TAG_ITEM || tag == TAG_ITEM_DELIM || tag == TAG_SEQ_DELIM {
        // Delimitation tags have no VR in either encoding.
        let length = cur.read_u32()?;
        if tag == TAG_ITEM && length != UNDEFINED_LENGTH {
            cur.skip(length as usize)?;
        }
        return Ok(Element { tag, value: &[] });
    }

    let (is_sequence_like, length) = if explicit {
        let vr = cur.take(2)?;
        if long_form_vr(vr) {
            cur.skip(2)?; // reserved
            (vr == b"SQ" || vr == b"UN", cur.read_u32()?)
        } else {
            (false, cur.read_u16()? as u32)
        }
    } else {
        let length = cur.read_u32()?;
        (length == UNDEFINED_LENGTH, length)
    };

    if length == UNDEFINED_LENGTH {
        if tag == TAG_PIXEL_DATA {
            // Encapsulated pixel data only occurs in compressed syntaxes.
            return Err(ImageIoError::UnsupportedTransferSyntax {
                path: cur.path.to_path_buf(),
                uid: "encapsulated pixel data".to_string(),
            });
        }
        if !is_sequence_like && explicit {
            return Err(ImageIoError::Malformed {
                path: cur.path.to_path_buf(),
                detail: format!("undefined length on non-sequence tag {:04X},{:04X}", tag.0, tag.1),
            });
        }
        skip_undefined_sequence(cur, explicit)?;
        return Ok(Element { tag, value: &[] });
    }

    let value = cur.take(length as usize)?;
    Ok(Element { tag, value })
}

/// Consumes items until the sequence delimitation tag.
fn skip_undefined_sequence(cur: &mut Cursor<'_>, explicit: bool) -> Result<(), ImageIoError> {
    loop {
        let tag = cur.read_tag()?;
        let length = cur.read_u32()?;
        match tag {
            t if t == TAG_SEQ_DELIM => return Ok(()),
            t if t == TAG_ITEM => {
                if length == UNDEFINED_LENGTH {
                    skip_undefined_item(cur, explicit)?;
                } else {
                    cur.skip(length as usize)?;
                }
            }
            _ => {
                return Err(ImageIoError::Malformed {
                    path: cur.path.to_path_buf(),
                    detail: format!(
                        "unexpected tag {:04X},{:04X} inside sequence",
                        tag.0, tag.1
                    ),
                })
            }
        }
    }
}

/// Consumes nested elements until the item delimitation tag.
fn skip_undefined_item(cur: &mut Cursor<'_>, explicit: bool) -> Result<(), ImageIoError> {
    loop {
        if cur.remaining() >= 4 {
            let g = u16::from_le_bytes([cur.data[cur.pos], cur.data[cur.pos + 1]]);
            let e = u16::from_le_bytes([cur.data[cur.pos + 2], cur.data[cur.pos + 3]]);
            if (g, e) == TAG_ITEM_DELIM {
                cur.skip(8)?; // tag + zero length
                return Ok(());
            }
        }
        read_element(cur, explicit)?;
    }
}

fn decode(data: &[u8], path: &Path) -> Result<(ImageBuffer, SourceImageMeta), ImageIoError> {
    if !looks_like_dicom(data) {
        return Err(ImageIoError::Malformed {
            path: path.to_path_buf(),
            detail: "missing DICM magic".to_string(),
        });
    }
    let mut cur = Cursor {
        data,
        pos: 132,
        path,
    };

    // File meta group: always explicit VR little endian.
    let mut transfer_syntax = String::new();
    while cur.peek_group() == Some(0x0002) {
        let element = read_element(&mut cur, true)?;
        if element.tag == (0x0002, 0x0010) {
            transfer_syntax = string_value(element.value);
        }
    }

    let explicit = match transfer_syntax.as_str() {
        EXPLICIT_VR_LE => true,
        IMPLICIT_VR_LE => false,
        other => {
            return Err(ImageIoError::UnsupportedTransferSyntax {
                path: path.to_path_buf(),
                uid: other.to_string(),
            })
        }
    };

    let mut samples_per_pixel: Option<u16> = None;
    let mut photometric: Option<String> = None;
    let mut frames: Option<String> = None;
    let mut rows: Option<u16> = None;
    let mut columns: Option<u16> = None;
    let mut bits_allocated: Option<u16> = None;
    let mut bits_stored: Option<u16> = None;
    let mut pixel_representation: Option<u16> = None;
    let mut rescale_intercept: Option<f64> = None;
    let mut rescale_slope: Option<f64> = None;
    let mut pixel_data: Option<&[u8]> = None;

    while cur.remaining() > 0 {
        let element = read_element(&mut cur, explicit)?;
        match element.tag {
            t if t == TAG_SAMPLES_PER_PIXEL => samples_per_pixel = u16_value(element.value),
            t if t == TAG_PHOTOMETRIC => photometric = Some(string_value(element.value)),
            t if t == TAG_NUMBER_OF_FRAMES => frames = Some(string_value(element.value)),
            t if t == TAG_ROWS => rows = u16_value(element.value),
            t if t == TAG_COLUMNS => columns = u16_value(element.value),
            t if t == TAG_BITS_ALLOCATED => bits_allocated = u16_value(element.value),
            t if t == TAG_BITS_STORED => bits_stored = u16_value(element.value),
            t if t == TAG_PIXEL_REPRESENTATION => pixel_representation = u16_value(element.value),
            t if t == TAG_RESCALE_INTERCEPT => {
                rescale_intercept = string_value(element.value).parse().ok()
            }
            t if t == TAG_RESCALE_SLOPE => rescale_slope = string_value(element.value).parse().ok(),
            t if t == TAG_PIXEL_DATA => {
                pixel_data = Some(element.value);
                break;
            }
            _ => {}
        }
    }

    if let Some(spp) = samples_per_pixel {
        if spp != 1 {
            return Err(ImageIoError::UnsupportedColor {
                path: path.to_path_buf(),
                detail: format!("SamplesPerPixel={spp}"),
            });
        }
    }
    let photometric = match photometric.as_deref() {
        Some("MONOCHROME1") => Some(Photometric::Monochrome1),
        Some("MONOCHROME2") | None => match photometric {
            None => None,
            _ => Some(Photometric::Monochrome2),
        },
        Some(other) => {
            return Err(ImageIoError::UnsupportedColor {
                path: path.to_path_buf(),
                detail: other.to_string(),
            })
        }
    };
    if let Some(frames) = frames {
        let n: i64 = frames.trim().parse().unwrap_or(1);
        if n != 1 {
            return Err(ImageIoError::UnsupportedPixelFormat {
                path: path.to_path_buf(),
                detail: format!("multi-frame image ({n} frames)"),
            });
        }
    }
    if pixel_representation.unwrap_or(0) != 0 {
        return Err(ImageIoError::UnsupportedPixelFormat {
            path: path.to_path_buf(),
            detail: "signed pixel data".to_string(),
        });
    }

    let rows = rows.ok_or_else(|| missing(path, "Rows"))?;
    let columns = columns.ok_or_else(|| missing(path, "Columns"))?;
    let bits_allocated = bits_allocated.ok_or_else(|| missing(path, "BitsAllocated"))?;
    let bits_stored = bits_stored.unwrap_or(bits_allocated);
    let pixel_data = pixel_data.ok_or_else(|| missing(path, "PixelData"))?;

    let bit_depth = match bits_allocated {
        8 => BitDepth::Eight,
        16 => BitDepth::Sixteen,
        other => {
            return Err(ImageIoError::UnsupportedBitDepth {
                path: path.to_path_buf(),
                bits: other,
            })
        }
    };
    if !matches!(bits_stored, 8 | 10 | 12 | 14 | 16) || bits_stored > bits_allocated {
        return Err(ImageIoError::UnsupportedBitDepth {
            path: path.to_path_buf(),
            bits: bits_stored,
        });
    }

    let pixel_count = rows as usize * columns as usize;
    let bytes_per_sample = (bits_allocated / 8) as usize;
    let expected = pixel_count * bytes_per_sample;
    // A single trailing pad byte keeps odd-length values even.
    if pixel_data.len() < expected || pixel_data.len() > expected + 1 {
        return Err(ImageIoError::Truncated {
            path: path.to_path_buf(),
        });
    }

    let samples: Vec<u16> = match bit_depth {
        BitDepth::Eight => pixel_data[..expected].iter().map(|&b| b as u16).collect(),
        BitDepth::Sixteen => pixel_data[..expected]
            .chunks_exact(2)
            .map(|pair| u16::from_le_bytes([pair[0], pair[1]]))
            .collect(),
    };

    let buffer = ImageBuffer::new(columns as u32, rows as u32, bit_depth, samples)?;
    let rescale = match (rescale_slope, rescale_intercept) {
        (None, None) => None,
        (slope, intercept) => Some((slope.unwrap_or(1.0), intercept.unwrap_or(0.0))),
    };
    let meta = SourceImageMeta {
        photometric,
        stored_bits: bits_stored,
        path: path.to_path_buf(),
        rescale,
    };
    Ok((buffer, meta))
}

fn missing(path: &Path, attr: &str) -> ImageIoError {
    ImageIoError::Malformed {
        path: path.to_path_buf(),
        detail: format!("missing required attribute {attr}"),
    }
}

fn string_value(value: &[u8]) -> String {
    String::from_utf8_lossy(value)
        .trim_end_matches(['\0', ' '])
        .trim()
        .to_string()
}

fn u16_value(value: &[u8]) -> Option<u16> {
    if value.len() >= 2 {
        Some(u16::from_le_bytes([value[0], value[1]]))
    } else {
        None
    }
}
